use super::{parse_instant, IngestContext, IngestError, ParseOutcome};
use crate::records::{CommitRecord, FileChange, Payload, RawRecord};

struct Block {
    start_line: usize,
    revision: String,
    author: Option<String>,
    date: Option<String>,
    files: Vec<FileChange>,
    error: Option<String>,
}

fn header<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    let (k, rest) = line.split_once(char::is_whitespace)?;
    let k = k.strip_suffix(':').unwrap_or(k);
    k.eq_ignore_ascii_case(key).then(|| rest.trim())
}

/// Reads blocks of the form
///
/// ```text
/// commit <revision>
/// author <name>
/// date <instant>
///
/// <added>\t<deleted>\t<path>
/// ```
///
/// Indented lines (commit messages) are ignored. `-` counts (binary files)
/// read as zero.
pub fn parse_commit_log(text: &str, ctx: &IngestContext) -> Result<ParseOutcome, IngestError> {
    let mut blocks: Vec<Block> = Vec::new();
    let mut out = ParseOutcome::default();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        if raw.trim().is_empty() || raw.starts_with(' ') {
            continue;
        }
        if let Some(rev) = header(raw, "commit") {
            blocks.push(Block {
                start_line: lineno,
                revision: rev.split_whitespace().next().unwrap_or("").to_string(),
                author: None,
                date: None,
                files: Vec::new(),
                error: None,
            });
            continue;
        }
        let Some(block) = blocks.last_mut() else {
            out.warnings
                .push(format!("line {lineno}: content before the first commit header"));
            continue;
        };
        if let Some(a) = header(raw, "author") {
            block.author = Some(a.to_string());
        } else if let Some(d) = header(raw, "date") {
            block.date = Some(d.to_string());
        } else if raw.contains('\t') {
            match numstat(raw) {
                Some(change) => block.files.push(change),
                None => {
                    block.error.get_or_insert(format!("line {lineno}: bad numstat line {raw:?}"));
                }
            }
        } else {
            block
                .error
                .get_or_insert(format!("line {lineno}: unexpected line {raw:?}"));
        }
    }

    for b in blocks {
        let label = format!("commit at line {}", b.start_line);
        if let Some(e) = b.error {
            out.warnings.push(format!("{label}: {e}; skipped"));
            continue;
        }
        if b.revision.is_empty() {
            out.warnings.push(format!("{label}: empty revision; skipped"));
            continue;
        }
        let Some(date) = b.date else {
            out.warnings
                .push(format!("{label} ({}): missing date; skipped", b.revision));
            continue;
        };
        let Some(timestamp) = parse_instant(&date) else {
            out.warnings.push(format!(
                "{label} ({}): unreadable date {date:?}; skipped",
                b.revision
            ));
            continue;
        };
        out.push(RawRecord::new(
            b.revision.clone(),
            ctx.project.clone(),
            timestamp,
            Payload::Commit(CommitRecord {
                revision: b.revision,
                author: b.author.unwrap_or_default(),
                files: b.files,
            }),
        ));
    }
    Ok(out)
}

fn numstat(line: &str) -> Option<FileChange> {
    let mut parts = line.splitn(3, '\t');
    let added = parts.next()?.trim();
    let deleted = parts.next()?.trim();
    let path = parts.next()?.trim();
    if path.is_empty() {
        return None;
    }
    let count = |s: &str| if s == "-" { Some(0) } else { s.parse().ok() };
    Some(FileChange {
        path: path.to_string(),
        lines_added: count(added)?,
        lines_deleted: count(deleted)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    fn ctx() -> IngestContext {
        IngestContext::new("p", Utc.with_ymd_and_hms(2018, 1, 1, 0, 0, 0).unwrap())
    }

    fn commit(r: &RawRecord) -> &CommitRecord {
        match &r.payload {
            Payload::Commit(c) => c,
            _ => panic!("not a commit"),
        }
    }

    #[test]
    fn numstat_lines() {
        let log = "commit abc\nauthor ann\ndate 2018-01-02T10:00:00Z\n\n    fix\n\n3\t1\tsrc/a.c\n-\t-\timg.png\n";
        let out = parse_commit_log(log, &ctx()).unwrap();
        assert!(out.warnings.is_empty(), "{:?}", out.warnings);
        let c = commit(&out.records[0]);
        assert_eq!(out.records[0].record_id, "abc");
        assert_eq!(c.author, "ann");
        assert_eq!(
            c.files,
            vec![
                FileChange { path: "src/a.c".into(), lines_added: 3, lines_deleted: 1 },
                FileChange { path: "img.png".into(), lines_added: 0, lines_deleted: 0 },
            ]
        );
    }

    #[test]
    fn same_path_in_two_commits() {
        let log = "commit a\ndate 2018-01-02\n1\t0\tx.c\ncommit b\ndate 2018-01-03\n2\t0\tx.c\n";
        let out = parse_commit_log(log, &ctx()).unwrap();
        assert_eq!(out.records.len(), 2);
    }

    #[test]
    fn bad_block_is_skipped() {
        let log = "commit a\ndate 2018-01-02\nx\ty\tz.c\ncommit b\ndate 2018-01-03\n1\t1\tw.c\ncommit c\n";
        let out = parse_commit_log(log, &ctx()).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].record_id, "b");
        assert_eq!(out.warnings.len(), 2);
    }

    #[test]
    fn git_style_headers() {
        let log = "commit 1f2e\nAuthor: Bo <bo@x>\nDate: 2018-01-02T10:00:00+00:00\n\n1\t2\ta\n";
        let out = parse_commit_log(log, &ctx()).unwrap();
        assert_eq!(commit(&out.records[0]).author, "Bo <bo@x>");
    }
}
