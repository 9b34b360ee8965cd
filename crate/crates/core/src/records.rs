//! Canonical raw records as they arrive from data producers.

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    FileMeasure,
    Commit,
    TestRun,
    Issue,
    LogEntry,
    UsageEvent,
    AvailabilitySample,
}

impl SourceKind {
    pub const ALL: [SourceKind; 7] = [
        SourceKind::FileMeasure,
        SourceKind::Commit,
        SourceKind::TestRun,
        SourceKind::Issue,
        SourceKind::LogEntry,
        SourceKind::UsageEvent,
        SourceKind::AvailabilitySample,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SourceKind::FileMeasure => "file_measure",
            SourceKind::Commit => "commit",
            SourceKind::TestRun => "test_run",
            SourceKind::Issue => "issue",
            SourceKind::LogEntry => "log_entry",
            SourceKind::UsageEvent => "usage_event",
            SourceKind::AvailabilitySample => "availability_sample",
        }
    }
}

impl fmt::Display for SourceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SourceKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown kind `{s}`"))
    }
}

/// Half-open time range `[from, to)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub from: DateTime<Utc>,
    pub to: DateTime<Utc>,
}

impl Window {
    pub fn new(from: DateTime<Utc>, to: DateTime<Utc>) -> Self {
        Window { from, to }
    }

    /// The `days`-long window ending (exclusively) at `end`.
    pub fn trailing_days(end: DateTime<Utc>, days: u32) -> Self {
        Window {
            from: end - Duration::days(i64::from(days)),
            to: end,
        }
    }

    pub fn contains(&self, t: DateTime<Utc>) -> bool {
        self.from <= t && t < self.to
    }

    /// Everything representable; handy for whole-history queries.
    pub fn all_time() -> Self {
        Window {
            from: DateTime::<Utc>::MIN_UTC,
            to: DateTime::<Utc>::MAX_UTC,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Blocker,
    Critical,
    Major,
    Minor,
    Info,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationType {
    CodeSmell,
    Bug,
    Vulnerability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: String,
    pub severity: Severity,
    #[serde(rename = "type")]
    pub kind: ViolationType,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileMeasure {
    pub path: String,
    pub loc: u64,
    pub comment_lines: u64,
    #[serde(default)]
    pub duplicated_lines: u64,
    #[serde(default)]
    pub function_complexities: Vec<u64>,
    #[serde(default)]
    pub violations: Vec<Violation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line_coverage: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition_coverage: Option<f64>,
}

impl FileMeasure {
    /// Comment density in percent; `None` for empty files.
    pub fn comment_density_pct(&self) -> Option<f64> {
        (self.loc > 0).then(|| 100.0 * self.comment_lines as f64 / self.loc as f64)
    }

    pub fn duplicated_density_pct(&self) -> Option<f64> {
        (self.loc > 0).then(|| 100.0 * self.duplicated_lines as f64 / self.loc as f64)
    }

    /// Mean cyclomatic complexity per function (sum / count); 0 for files without functions.
    pub fn mean_complexity(&self) -> f64 {
        if self.function_complexities.is_empty() {
            return 0.0;
        }
        let sum: u64 = self.function_complexities.iter().sum();
        sum as f64 / self.function_complexities.len() as f64
    }

    pub fn blocking_violations(&self) -> usize {
        self.violations
            .iter()
            .filter(|v| matches!(v.severity, Severity::Blocker | Severity::Critical))
            .count()
    }

    fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.comment_lines > self.loc {
            out.push(format!(
                "{}: comment_lines {} exceeds loc {}",
                self.path, self.comment_lines, self.loc
            ));
        }
        if self.duplicated_lines > self.loc {
            out.push(format!(
                "{}: duplicated_lines {} exceeds loc {}",
                self.path, self.duplicated_lines, self.loc
            ));
        }
        for (name, pct) in [
            ("line_coverage", self.line_coverage),
            ("condition_coverage", self.condition_coverage),
        ] {
            if let Some(p) = pct {
                if !(0.0..=100.0).contains(&p) {
                    out.push(format!("{}: {name} {p} outside [0,100]", self.path));
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileChange {
    pub path: String,
    pub lines_added: u64,
    pub lines_deleted: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub revision: String,
    pub author: String,
    #[serde(default)]
    pub files: Vec<FileChange>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRun {
    pub build_id: String,
    #[serde(default)]
    pub suite: String,
    pub total: u64,
    pub errors: u64,
    pub failures: u64,
    pub skipped: u64,
    pub duration_sec: f64,
}

impl TestRun {
    /// Passing share of the executed (non-skipped) tests; `None` when nothing ran.
    pub fn success_density(&self) -> Option<f64> {
        let executed = self.total.checked_sub(self.skipped)?;
        if executed == 0 {
            return None;
        }
        let passed = executed.saturating_sub(self.errors + self.failures);
        Some(passed as f64 / executed as f64)
    }

    pub fn label(&self) -> String {
        if self.suite.is_empty() {
            self.build_id.clone()
        } else {
            format!("{}/{}", self.build_id, self.suite)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueType {
    Bug,
    Maintenance,
    Feature,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueStatus {
    Open,
    InProgress,
    Done,
    Other,
}

impl IssueStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            IssueStatus::Open => "open",
            IssueStatus::InProgress => "in_progress",
            IssueStatus::Done => "done",
            IssueStatus::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub issue_id: String,
    pub issue_type: IssueType,
    pub status: IssueStatus,
    pub created: DateTime<Utc>,
    pub updated: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolved: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iteration: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub release: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub due_date: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignee: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimate_hours: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

/// Issue fields that a completeness rule may require.
pub const ISSUE_OPTIONAL_FIELDS: [&str; 7] = [
    "resolved",
    "iteration",
    "release",
    "due_date",
    "assignee",
    "estimate_hours",
    "description",
];

impl Issue {
    /// Whether the named optional field is populated; `None` for unknown names.
    pub fn has_field(&self, name: &str) -> Option<bool> {
        Some(match name {
            "resolved" => self.resolved.is_some(),
            "iteration" => self.iteration.is_some(),
            "release" => self.release.is_some(),
            "due_date" => self.due_date.is_some(),
            "assignee" => self.assignee.is_some(),
            "estimate_hours" => self.estimate_hours.is_some(),
            "description" => self.description.is_some(),
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LogLevel {
    Fatal,
    Error,
    Warning,
    Info,
    Debug,
    Trace,
}

impl FromStr for LogLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "fatal" | "crit" | "critical" => Ok(LogLevel::Fatal),
            "error" | "err" => Ok(LogLevel::Error),
            "warning" | "warn" => Ok(LogLevel::Warning),
            "info" => Ok(LogLevel::Info),
            "debug" => Ok(LogLevel::Debug),
            "trace" => Ok(LogLevel::Trace),
            other => Err(format!("unknown log level `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub level: LogLevel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_line: Option<u64>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageEvent {
    pub feature: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_sec: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvailabilitySample {
    pub up: bool,
}

/// Source-specific content. The `source_kind` tag always agrees with the variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source_kind", content = "payload", rename_all = "snake_case")]
pub enum Payload {
    FileMeasure(FileMeasure),
    Commit(CommitRecord),
    TestRun(TestRun),
    Issue(Issue),
    LogEntry(LogEntry),
    UsageEvent(UsageEvent),
    AvailabilitySample(AvailabilitySample),
}

impl Payload {
    pub fn kind(&self) -> SourceKind {
        match self {
            Payload::FileMeasure(_) => SourceKind::FileMeasure,
            Payload::Commit(_) => SourceKind::Commit,
            Payload::TestRun(_) => SourceKind::TestRun,
            Payload::Issue(_) => SourceKind::Issue,
            Payload::LogEntry(_) => SourceKind::LogEntry,
            Payload::UsageEvent(_) => SourceKind::UsageEvent,
            Payload::AvailabilitySample(_) => SourceKind::AvailabilitySample,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub record_id: String,
    pub project: String,
    pub timestamp: DateTime<Utc>,
    #[serde(flatten)]
    pub payload: Payload,
}

impl RawRecord {
    pub fn new(
        record_id: impl Into<String>,
        project: impl Into<String>,
        timestamp: DateTime<Utc>,
        payload: Payload,
    ) -> Self {
        RawRecord {
            record_id: record_id.into(),
            project: project.into(),
            timestamp,
            payload,
        }
    }

    pub fn kind(&self) -> SourceKind {
        self.payload.kind()
    }

    /// Checks the per-payload invariants; empty when the record is storable.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.record_id.is_empty() {
            out.push("record_id is empty".to_string());
        }
        match &self.payload {
            Payload::FileMeasure(f) => out.extend(f.problems()),
            Payload::Commit(c) => {
                if c.revision.is_empty() {
                    out.push("commit revision is empty".into());
                }
            }
            Payload::TestRun(t) => {
                if t.errors + t.failures + t.skipped > t.total {
                    out.push(format!(
                        "test run {}: errors + failures + skipped exceeds total {}",
                        t.label(),
                        t.total
                    ));
                }
                if !(t.duration_sec.is_finite() && t.duration_sec >= 0.0) {
                    out.push(format!("test run {}: negative duration", t.label()));
                }
            }
            Payload::Issue(i) => {
                if i.updated < i.created {
                    out.push(format!("issue {}: updated before created", i.issue_id));
                }
                if i.resolved.is_some_and(|r| r < i.created) {
                    out.push(format!("issue {}: resolved before created", i.issue_id));
                }
            }
            Payload::LogEntry(_) => {}
            Payload::UsageEvent(u) => {
                if u.feature.is_empty() {
                    out.push("usage event feature is empty".into());
                }
                if u.duration_sec.is_some_and(|d| !(d.is_finite() && d >= 0.0)) {
                    out.push("usage event duration is negative".into());
                }
            }
            Payload::AvailabilitySample(_) => {}
        }
        out
    }
}

/// Stable content-derived identifier: `<prefix>-<first 16 bytes of sha256, hex>`.
pub fn derive_record_id(prefix: &str, parts: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part.as_bytes());
        hasher.update([0x1f]);
    }
    let digest = hasher.finalize();
    format!("{prefix}-{}", hex::encode(&digest[..16]))
}
