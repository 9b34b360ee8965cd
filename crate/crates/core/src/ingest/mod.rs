//! Parsers from tool export formats to [`RawRecord`]s.
//!
//! Every parser is a pure function of its input text and an
//! [`IngestContext`]. Problems confined to one entry (a suite, a row, a line)
//! become warnings and the entry is skipped; only an unreadable container is
//! an error.

mod commits;
mod generic;
mod issues;
mod junit;
mod logs;
mod static_json;

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::records::RawRecord;

pub use commits::parse_commit_log;
pub use generic::ingest_generic_records;
pub use issues::parse_issue_csv;
pub use junit::parse_test_report_xml;
pub use logs::{parse_log_lines, LogPattern, DEFAULT_LOG_PATTERN, DEFAULT_TIMESTAMP_FORMAT};
pub use static_json::parse_static_analysis_export;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed XML: {0}")]
    Xml(String),
    #[error("malformed JSON: {0}")]
    Json(String),
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("missing column {0}")]
    MissingColumn(String),
    #[error("invalid log pattern: {0}")]
    Pattern(String),
    #[error("unknown format `{0}`")]
    UnknownFormat(String),
}

/// Defaults applied where an input does not say.
#[derive(Debug, Clone)]
pub struct IngestContext {
    pub project: String,
    /// Overrides the build id found in test reports.
    pub build_id: Option<String>,
    /// Timestamp for entries that carry none.
    pub default_timestamp: DateTime<Utc>,
    pub log_pattern: LogPattern,
}

impl IngestContext {
    pub fn new(project: impl Into<String>, default_timestamp: DateTime<Utc>) -> Self {
        IngestContext {
            project: project.into(),
            build_id: None,
            default_timestamp,
            log_pattern: LogPattern::default(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ParseOutcome {
    pub records: Vec<RawRecord>,
    pub warnings: Vec<String>,
}

impl ParseOutcome {
    fn push(&mut self, record: RawRecord) {
        let problems = record.problems();
        if problems.is_empty() {
            self.records.push(record);
        } else {
            self.warnings
                .push(format!("{}: {}", record.record_id, problems.join("; ")));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    TestXml,
    Commits,
    Static,
    Issues,
    Logs,
    Records,
}

impl Format {
    pub const ALL: [Format; 6] = [
        Format::TestXml,
        Format::Commits,
        Format::Static,
        Format::Issues,
        Format::Logs,
        Format::Records,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Format::TestXml => "testxml",
            Format::Commits => "commits",
            Format::Static => "static",
            Format::Issues => "issues",
            Format::Logs => "logs",
            Format::Records => "records",
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Format {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Format::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| IngestError::UnknownFormat(s.to_string()))
    }
}

/// Parses `text` with the parser for `format`.
pub fn parse(format: Format, text: &str, ctx: &IngestContext) -> Result<ParseOutcome, IngestError> {
    match format {
        Format::TestXml => parse_test_report_xml(text, ctx),
        Format::Commits => parse_commit_log(text, ctx),
        Format::Static => parse_static_analysis_export(text, ctx),
        Format::Issues => parse_issue_csv(text, ctx),
        Format::Logs => parse_log_lines(text, &ctx.log_pattern, ctx),
        Format::Records => ingest_generic_records(text, ctx),
    }
}

/// Reads an instant in any of the accepted spellings: RFC 3339, a naive
/// `YYYY-MM-DDTHH:MM[:SS[.f]]` or `YYYY-MM-DD HH:MM[:SS]` (taken as UTC), or a
/// bare date (midnight UTC).
pub fn parse_instant(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(t.and_utc());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .map(|d| d.and_hms_opt(0, 0, 0).expect("midnight").and_utc())
}

fn stamp(t: &DateTime<Utc>) -> String {
    t.to_rfc3339_opts(chrono::SecondsFormat::AutoSi, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    #[test]
    fn instants() {
        let t = Utc.with_ymd_and_hms(2018, 1, 5, 10, 0, 0).unwrap();
        assert_eq!(parse_instant("2018-01-05T10:00:00Z"), Some(t));
        assert_eq!(parse_instant("2018-01-05T11:00:00+01:00"), Some(t));
        assert_eq!(parse_instant("2018-01-05T10:00:00"), Some(t));
        assert_eq!(parse_instant("2018-01-05 10:00:00"), Some(t));
        assert_eq!(parse_instant("2018-01-05 10:00"), Some(t));
        assert_eq!(
            parse_instant("2018-01-05"),
            Some(Utc.with_ymd_and_hms(2018, 1, 5, 0, 0, 0).unwrap())
        );
        assert_eq!(parse_instant("yesterday"), None);
    }

    #[test]
    fn format_names() {
        for f in Format::ALL {
            assert_eq!(f.as_str().parse::<Format>().unwrap(), f);
        }
        assert!("xml".parse::<Format>().is_err());
    }
}
