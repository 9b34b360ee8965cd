use serde_json::{Map, Value};

use super::{parse_instant, stamp, IngestContext, IngestError, ParseOutcome};
use crate::records::{derive_record_id, RawRecord, SourceKind};

const ENVELOPE: [&str; 5] = ["record_id", "project", "timestamp", "source_kind", "payload"];

/// One record per non-blank line. A line is either a full record
/// (`record_id`, `project`, `timestamp`, `source_kind`, `payload`) or a flat
/// object whose non-envelope keys form the payload. Missing `record_id` and
/// `project` are filled in.
pub fn ingest_generic_records(text: &str, ctx: &IngestContext) -> Result<ParseOutcome, IngestError> {
    let mut out = ParseOutcome::default();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match record(line, ctx) {
            Ok(r) => out.push(r),
            Err(msg) => out.warnings.push(format!("line {}: {msg}", i + 1)),
        }
    }
    Ok(out)
}

fn record(line: &str, ctx: &IngestContext) -> Result<RawRecord, String> {
    let Value::Object(mut obj) = serde_json::from_str::<Value>(line).map_err(|e| e.to_string())?
    else {
        return Err("expected a JSON object".into());
    };
    let kind: SourceKind = match obj.get("source_kind") {
        Some(Value::String(k)) => k.parse()?,
        Some(_) => return Err("source_kind must be a string".into()),
        None => return Err("missing source_kind".into()),
    };
    let timestamp = match obj.get("timestamp") {
        Some(Value::String(t)) => parse_instant(t).ok_or_else(|| format!("unreadable timestamp {t:?}"))?,
        _ => return Err("missing timestamp".into()),
    };
    obj.insert("timestamp".into(), Value::String(stamp(&timestamp)));
    if !obj.contains_key("payload") {
        let payload: Map<String, Value> = obj
            .iter()
            .filter(|(k, _)| !ENVELOPE.contains(&k.as_str()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        obj.retain(|k, _| ENVELOPE.contains(&k.as_str()));
        obj.insert("payload".into(), Value::Object(payload));
    }
    if !obj.contains_key("project") {
        obj.insert("project".into(), Value::String(ctx.project.clone()));
    }
    if !obj.contains_key("record_id") {
        let payload = serde_json::to_string(&obj["payload"]).expect("value serializes");
        let id = derive_record_id(kind.as_str(), &[&stamp(&timestamp), &payload]);
        obj.insert("record_id".into(), Value::String(id));
    }
    serde_json::from_value(Value::Object(obj)).map_err(|e| format!("invalid {kind} record: {e}"))
}
