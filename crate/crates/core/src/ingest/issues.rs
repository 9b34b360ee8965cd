use std::collections::HashMap;

use csv::{ReaderBuilder, StringRecord, Trim};

use super::{parse_instant, stamp, IngestContext, IngestError, ParseOutcome};
use crate::records::{derive_record_id, Issue, IssueStatus, IssueType, Payload, RawRecord};

const COLUMNS: [&str; 12] = [
    "issue_id",
    "type",
    "status",
    "created",
    "updated",
    "resolved",
    "iteration",
    "release",
    "due_date",
    "assignee",
    "estimate_hours",
    "description",
];

const MANDATORY: [&str; 5] = ["issue_id", "type", "status", "created", "updated"];

fn canonical_column(header: &str) -> Option<&'static str> {
    let h = header.trim().to_ascii_lowercase().replace([' ', '-'], "_");
    let name = match h.as_str() {
        "id" | "key" | "issue" => "issue_id",
        "issue_type" | "issuetype" | "tracker" => "type",
        "state" => "status",
        "created_at" => "created",
        "updated_at" => "updated",
        "resolved_at" | "resolution_date" => "resolved",
        "sprint" | "milestone" => "iteration",
        "fix_version" | "version" => "release",
        "due" => "due_date",
        "estimate" | "original_estimate" => "estimate_hours",
        "summary" => "description",
        other => other,
    };
    COLUMNS.iter().copied().find(|c| *c == name)
}

pub fn issue_type(s: &str) -> IssueType {
    match s.trim().to_ascii_lowercase().as_str() {
        "bug" | "defect" => IssueType::Bug,
        "maintenance" | "task" | "improvement" | "chore" => IssueType::Maintenance,
        "feature" | "story" | "new feature" | "enhancement" => IssueType::Feature,
        _ => IssueType::Other,
    }
}

pub fn issue_status(s: &str) -> IssueStatus {
    match s.trim().to_ascii_lowercase().replace(' ', "_").as_str() {
        "open" | "new" | "to_do" | "todo" | "reopened" | "backlog" => IssueStatus::Open,
        "in_progress" | "doing" | "in_review" => IssueStatus::InProgress,
        "done" | "closed" | "resolved" => IssueStatus::Done,
        _ => IssueStatus::Other,
    }
}

/// One issue per data row. Columns are matched by header name (common
/// tracker spellings are accepted); unknown columns are ignored and empty
/// cells leave the optional field absent.
pub fn parse_issue_csv(text: &str, ctx: &IngestContext) -> Result<ParseOutcome, IngestError> {
    let mut reader = ReaderBuilder::new()
        .flexible(true)
        .trim(Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| IngestError::Csv(e.to_string()))?
        .clone();
    let mut index: HashMap<&'static str, usize> = HashMap::new();
    for (i, h) in headers.iter().enumerate() {
        if let Some(c) = canonical_column(h) {
            index.entry(c).or_insert(i);
        }
    }
    if let Some(missing) = MANDATORY.iter().find(|c| !index.contains_key(*c)) {
        return Err(IngestError::MissingColumn(missing.to_string()));
    }

    let mut out = ParseOutcome::default();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                out.warnings.push(format!("row {line}: {e}; skipped"));
                continue;
            }
        };
        if row.iter().all(str::is_empty) {
            continue;
        }
        match issue_row(&row, &index, ctx) {
            Ok(rec) => out.push(rec),
            Err(msg) => out.warnings.push(format!("row {line}: {msg}; skipped")),
        }
    }
    Ok(out)
}

fn issue_row(
    row: &StringRecord,
    index: &HashMap<&'static str, usize>,
    ctx: &IngestContext,
) -> Result<RawRecord, String> {
    let cell = |c: &str| {
        index
            .get(c)
            .and_then(|&i| row.get(i))
            .filter(|v| !v.is_empty())
    };
    let required = |c: &str| cell(c).ok_or_else(|| format!("empty {c}"));
    let instant = |c: &str| -> Result<Option<_>, String> {
        cell(c)
            .map(|v| parse_instant(v).ok_or_else(|| format!("unreadable {c} {v:?}")))
            .transpose()
    };

    let issue_id = required("issue_id")?.to_string();
    let issue_type = issue_type(required("type")?);
    let status = issue_status(required("status")?);
    required("created")?;
    required("updated")?;
    let created = instant("created")?.expect("checked above");
    let updated = instant("updated")?.expect("checked above");
    let estimate_hours = cell("estimate_hours")
        .map(|v| {
            v.parse::<f64>()
                .ok()
                .filter(|h| h.is_finite() && *h >= 0.0)
                .ok_or_else(|| format!("unreadable estimate_hours {v:?}"))
        })
        .transpose()?;
    let text = |c: &str| cell(c).map(str::to_string);

    let issue = Issue {
        issue_id,
        issue_type,
        status,
        created,
        updated,
        resolved: instant("resolved")?,
        iteration: text("iteration"),
        release: text("release"),
        due_date: instant("due_date")?,
        assignee: text("assignee"),
        estimate_hours,
        description: text("description"),
    };
    Ok(RawRecord::new(
        derive_record_id("issue", &[&issue.issue_id, &stamp(&updated)]),
        ctx.project.clone(),
        updated,
        Payload::Issue(issue),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    const HEADER: &str = "issue_id,type,status,created,updated,resolved,iteration,release,due_date,assignee,estimate_hours,description";

    fn ctx() -> IngestContext {
        IngestContext::new("p", Utc.with_ymd_and_hms(2018, 1, 1, 0, 0, 0).unwrap())
    }

    fn issues(csv: &str) -> ParseOutcome {
        parse_issue_csv(csv, &ctx()).unwrap()
    }

    fn issue(r: &RawRecord) -> &Issue {
        match &r.payload {
            Payload::Issue(i) => i,
            _ => panic!("not an issue"),
        }
    }

    #[test]
    fn sparse_row() {
        let out = issues(&format!("{HEADER}\nI-1,bug,open,2018-01-01,2018-01-05,,,,,,\n"));
        assert!(out.warnings.is_empty(), "{:?}", out.warnings);
        let i = issue(&out.records[0]);
        assert_eq!(i.issue_type, IssueType::Bug);
        assert_eq!(i.status, IssueStatus::Open);
        assert_eq!(i.assignee, None);
        assert_eq!(
            out.records[0].timestamp,
            Utc.with_ymd_and_hms(2018, 1, 5, 0, 0, 0).unwrap()
        );
    }

    #[test]
    fn full_row() {
        let out = issues(&format!(
            "{HEADER}\nI-2,feature,done,2018-01-01,2018-01-09,2018-01-09,sprint-1,1.0,2018-01-10,ann,4.5,\"Export, with commas\"\n"
        ));
        let i = issue(&out.records[0]);
        for f in crate::records::ISSUE_OPTIONAL_FIELDS {
            assert_eq!(i.has_field(f), Some(true), "{f}");
        }
        assert_eq!(i.description.as_deref(), Some("Export, with commas"));
        assert_eq!(i.estimate_hours, Some(4.5));
    }

    #[test]
    fn versions_differ_by_updated() {
        let out = issues(&format!(
            "{HEADER}\nI-1,bug,open,2018-01-01,2018-01-05\nI-1,bug,done,2018-01-01,2018-01-08\n"
        ));
        assert_eq!(out.records.len(), 2);
        assert_ne!(out.records[0].record_id, out.records[1].record_id);
    }

    #[test]
    fn unknown_columns_and_aliases() {
        let out = issues("Key,Issue Type,Status,Created,Updated,Votes,Assignee\nX-9,Story,In Progress,2018-01-01,2018-01-02,7,bo\n");
        let i = issue(&out.records[0]);
        assert_eq!(i.issue_type, IssueType::Feature);
        assert_eq!(i.status, IssueStatus::InProgress);
        assert_eq!(i.assignee.as_deref(), Some("bo"));
    }

    #[test]
    fn bad_rows_are_skipped() {
        let out = issues(&format!(
            "{HEADER}\n,bug,open,2018-01-01,2018-01-02\nI-3,bug,open,someday,2018-01-02\nI-4,bug,open,2018-01-03,2018-01-02\nI-5,bug,open,2018-01-01,2018-01-02\n"
        ));
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.warnings.len(), 3);
    }

    #[test]
    fn missing_mandatory_column() {
        assert!(matches!(
            parse_issue_csv("issue_id,type,status,created\n", &ctx()),
            Err(IngestError::MissingColumn(c)) if c == "updated"
        ));
    }
}
