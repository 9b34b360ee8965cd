use chrono::{DateTime, NaiveDateTime, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{stamp, IngestContext, IngestError, ParseOutcome};
use crate::records::{derive_record_id, LogEntry, LogLevel, Payload, RawRecord};

pub const DEFAULT_LOG_PATTERN: &str = r"^(?P<timestamp>\S+)\s+(?P<level>[A-Za-z]+)\s+(?:(?P<file>[^\s:]+):(?P<line>\d+)\s+)?(?P<message>.*)$";
pub const DEFAULT_TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%S";

/// How to split a log line. `pattern` must name the captures `timestamp`,
/// `level` and `message`; `file` and `line` are optional. `timestamp_format`
/// is a chrono format string; formats without an offset are read as UTC.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogPattern {
    pub pattern: String,
    pub timestamp_format: String,
}

impl Default for LogPattern {
    fn default() -> Self {
        LogPattern {
            pattern: DEFAULT_LOG_PATTERN.to_string(),
            timestamp_format: DEFAULT_TIMESTAMP_FORMAT.to_string(),
        }
    }
}

impl LogPattern {
    pub fn compile(&self) -> Result<Regex, IngestError> {
        let re = Regex::new(&self.pattern).map_err(|e| IngestError::Pattern(e.to_string()))?;
        let names: Vec<&str> = re.capture_names().flatten().collect();
        for required in ["timestamp", "level", "message"] {
            if !names.contains(&required) {
                return Err(IngestError::Pattern(format!(
                    "pattern lacks the named capture `{required}`"
                )));
            }
        }
        Ok(re)
    }

    fn timestamp(&self, s: &str) -> Option<DateTime<Utc>> {
        DateTime::parse_from_str(s, &self.timestamp_format)
            .map(|t| t.with_timezone(&Utc))
            .or_else(|_| NaiveDateTime::parse_from_str(s, &self.timestamp_format).map(|t| t.and_utc()))
            .ok()
    }
}

/// One log entry per matching line. Lines that do not match, or whose level
/// or timestamp cannot be read, are counted in a single warning.
pub fn parse_log_lines(
    text: &str,
    pattern: &LogPattern,
    ctx: &IngestContext,
) -> Result<ParseOutcome, IngestError> {
    let re = pattern.compile()?;
    let mut out = ParseOutcome::default();
    let mut unmatched = 0usize;
    let mut first_unmatched = None;
    let mut nonblank = 0usize;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        nonblank += 1;
        let lineno = i + 1;
        let entry = re.captures(line).and_then(|c| {
            let timestamp = pattern.timestamp(c.name("timestamp")?.as_str())?;
            let level: LogLevel = c.name("level")?.as_str().parse().ok()?;
            let source_line = match c.name("line") {
                Some(m) => Some(m.as_str().parse::<u64>().ok()?),
                None => None,
            };
            let message = c.name("message")?.as_str().trim().to_string();
            Some((
                timestamp,
                LogEntry {
                    level,
                    source_file: c.name("file").map(|m| m.as_str().to_string()),
                    source_line,
                    message,
                },
            ))
        });
        match entry {
            Some((timestamp, entry)) => {
                let id = derive_record_id(
                    "log",
                    &[&stamp(&timestamp), &entry.message, &lineno.to_string()],
                );
                out.push(RawRecord::new(
                    id,
                    ctx.project.clone(),
                    timestamp,
                    Payload::LogEntry(entry),
                ));
            }
            None => {
                unmatched += 1;
                first_unmatched.get_or_insert(lineno);
            }
        }
    }
    if nonblank > 0 && out.records.is_empty() {
        out.warnings.push("pattern matched nothing".to_string());
    } else if unmatched > 0 {
        out.warnings.push(format!(
            "{unmatched} line(s) skipped, first at line {}",
            first_unmatched.unwrap_or(0)
        ));
    }
    Ok(out)
}
