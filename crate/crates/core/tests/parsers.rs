use chrono::{TimeZone, Utc};
use qgauge_core::ingest::{parse, Format, IngestContext};
use qgauge_core::records::{IssueStatus, IssueType, LogLevel, Payload, SourceKind};

fn fixture(name: &str) -> String {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/");
    std::fs::read_to_string(format!("{path}{name}")).unwrap()
}

fn ctx() -> IngestContext {
    IngestContext::new("qgauge", Utc.with_ymd_and_hms(2018, 3, 2, 12, 0, 0).unwrap())
}

#[test]
fn junit_reads_leaf_suites() {
    let out = parse(Format::TestXml, &fixture("junit.xml"), &ctx()).unwrap();
    assert!(out.warnings.is_empty(), "{:?}", out.warnings);
    let runs: Vec<_> = out
        .records
        .iter()
        .map(|r| match &r.payload {
            Payload::TestRun(t) => t.clone(),
            p => panic!("unexpected {p:?}"),
        })
        .collect();
    assert_eq!(runs.len(), 3);
    assert!(runs.iter().all(|t| t.build_id == "nightly-2018-03-02"));
    let load = runs.iter().find(|t| t.suite == "api.LoadTest").unwrap();
    assert_eq!((load.total, load.failures, load.errors, load.skipped), (12, 1, 0, 3));
    assert_eq!(load.duration_sec, 300.5);
    let routes = runs.iter().find(|t| t.suite == "api.RoutesTest").unwrap();
    assert_eq!(routes.success_density(), Some(17.0 / 20.0));
}

#[test]
fn junit_build_override() {
    let mut c = ctx();
    c.build_id = Some("b-7".into());
    let out = parse(Format::TestXml, &fixture("junit.xml"), &c).unwrap();
    assert!(out.records.iter().all(|r| matches!(&r.payload, Payload::TestRun(t) if t.build_id == "b-7")));
}

#[test]
fn commit_log_skips_bad_block() {
    let out = parse(Format::Commits, &fixture("commits.log"), &ctx()).unwrap();
    assert_eq!(out.records.len(), 3);
    assert_eq!(out.warnings.len(), 1, "{:?}", out.warnings);
    let ids: Vec<_> = out.records.iter().map(|r| r.record_id.as_str()).collect();
    assert_eq!(ids, ["9f2c4e1", "4b7d0aa", "e5a5d02"]);
    let Payload::Commit(c) = &out.records[1].payload else { panic!() };
    assert_eq!(c.files[0].lines_added, 0);
    assert_eq!(c.files.len(), 2);
}

#[test]
fn static_export_rejects_inconsistent_file() {
    let out = parse(Format::Static, &fixture("static.json"), &ctx()).unwrap();
    assert_eq!(out.records.len(), 4);
    assert_eq!(out.warnings.len(), 1);
    assert!(out.warnings[0].contains("src/broken.rs"), "{:?}", out.warnings);
    assert!(out
        .records
        .iter()
        .all(|r| r.timestamp == Utc.with_ymd_and_hms(2018, 3, 2, 4, 0, 0).unwrap()));
}

#[test]
fn issue_csv_with_tracker_headers() {
    let out = parse(Format::Issues, &fixture("issues.csv"), &ctx()).unwrap();
    assert!(out.warnings.is_empty(), "{:?}", out.warnings);
    assert_eq!(out.records.len(), 5);
    let issue = |id: &str| {
        out.records
            .iter()
            .find_map(|r| match &r.payload {
                Payload::Issue(i) if i.issue_id == id => Some(i.clone()),
                _ => None,
            })
            .unwrap()
    };
    let a = issue("QG-101");
    assert_eq!((a.issue_type, a.status), (IssueType::Feature, IssueStatus::Done));
    assert_eq!(a.release.as_deref(), Some("1.2.0"));
    assert_eq!(issue("QG-102").status, IssueStatus::InProgress);
    assert_eq!(issue("QG-103").description.as_deref(), Some("Refresh demo fixtures, again"));
    assert_eq!(issue("QG-103").assignee, None);
    assert_eq!(issue("QG-104").status, IssueStatus::Open);
    assert_eq!(issue("QG-105").issue_type, IssueType::Other);
}

#[test]
fn log_lines_with_noise() {
    let out = parse(Format::Logs, &fixture("app.log"), &ctx()).unwrap();
    let levels: Vec<_> = out
        .records
        .iter()
        .map(|r| match &r.payload {
            Payload::LogEntry(e) => e.level,
            _ => panic!(),
        })
        .collect();
    assert_eq!(
        levels,
        [
            LogLevel::Info,
            LogLevel::Debug,
            LogLevel::Warning,
            LogLevel::Error,
            LogLevel::Fatal,
            LogLevel::Info
        ]
    );
    assert_eq!(out.warnings.len(), 1, "{:?}", out.warnings);
    assert!(out.warnings[0].starts_with("3 line(s) skipped, first at line 4"), "{:?}", out.warnings);
}

#[test]
fn generic_records() {
    let out = parse(Format::Records, &fixture("records.jsonl"), &ctx()).unwrap();
    assert_eq!(out.records.len(), 4);
    assert_eq!(out.records[2].record_id, "avail-0001");
    assert_eq!(out.records.iter().filter(|r| r.kind() == SourceKind::UsageEvent).count(), 2);
    assert_eq!(out.warnings.len(), 2, "{:?}", out.warnings);
    assert!(out.warnings[0].starts_with("line 6: unknown kind"));
    assert!(out.warnings[1].starts_with("line 7: missing timestamp"));
}

#[test]
fn garbage_is_an_error_not_a_panic() {
    let bytes = std::fs::read(concat!(env!("CARGO_MANIFEST_DIR"), "/../../fixtures/garbage.bin")).unwrap();
    let text = String::from_utf8_lossy(&bytes);
    assert!(parse(Format::TestXml, &text, &ctx()).is_err());
    assert!(parse(Format::Static, &text, &ctx()).is_err());
    for format in [Format::Commits, Format::Issues, Format::Logs, Format::Records] {
        if let Ok(out) = parse(format, &text, &ctx()) {
            assert!(out.records.is_empty(), "{format:?}");
        }
    }
}

#[test]
fn parsing_is_deterministic() {
    for (format, file) in [
        (Format::TestXml, "junit.xml"),
        (Format::Commits, "commits.log"),
        (Format::Static, "static.json"),
        (Format::Issues, "issues.csv"),
        (Format::Logs, "app.log"),
        (Format::Records, "records.jsonl"),
    ] {
        let text = fixture(file);
        assert_eq!(parse(format, &text, &ctx()).unwrap(), parse(format, &text, &ctx()).unwrap());
    }
}
