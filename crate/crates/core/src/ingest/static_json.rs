use serde_json::Value;

use super::{parse_instant, stamp, IngestContext, IngestError, ParseOutcome};
use crate::records::{derive_record_id, FileMeasure, Payload, RawRecord};

/// Reads `{"analysis_timestamp": .., "files": [..]}` or a bare array of file
/// entries (which then take the context's default timestamp).
pub fn parse_static_analysis_export(
    text: &str,
    ctx: &IngestContext,
) -> Result<ParseOutcome, IngestError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| IngestError::Json(e.to_string()))?;
    let (timestamp, files) = match doc {
        Value::Array(files) => (ctx.default_timestamp, files),
        Value::Object(mut obj) => {
            let ts = match obj.get("analysis_timestamp") {
                None | Some(Value::Null) => ctx.default_timestamp,
                Some(Value::String(s)) => parse_instant(s).ok_or_else(|| {
                    IngestError::Json(format!("unreadable analysis_timestamp {s:?}"))
                })?,
                Some(other) => {
                    return Err(IngestError::Json(format!(
                        "analysis_timestamp must be a string, found {other}"
                    )))
                }
            };
            match obj.remove("files") {
                Some(Value::Array(files)) => (ts, files),
                _ => return Err(IngestError::Json("expected a `files` array".into())),
            }
        }
        _ => return Err(IngestError::Json("expected an object or an array".into())),
    };

    let mut out = ParseOutcome::default();
    let ts = stamp(&timestamp);
    for (i, entry) in files.into_iter().enumerate() {
        match serde_json::from_value::<FileMeasure>(entry) {
            Ok(f) => out.push(RawRecord::new(
                derive_record_id("file", &[&ts, &f.path]),
                ctx.project.clone(),
                timestamp,
                Payload::FileMeasure(f),
            )),
            Err(e) => out
                .warnings
                .push(format!("file entry #{}: {e}; skipped", i + 1)),
        }
    }
    Ok(out)
}
