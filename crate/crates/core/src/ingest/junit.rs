use roxmltree::{Document, Node};

use super::{parse_instant, stamp, IngestContext, IngestError, ParseOutcome};
use crate::records::{derive_record_id, Payload, RawRecord, TestRun};

/// One test run per leaf `<testsuite>`. `tests` and `time` are mandatory;
/// `failures`, `errors` and `skipped` default to 0.
pub fn parse_test_report_xml(text: &str, ctx: &IngestContext) -> Result<ParseOutcome, IngestError> {
    let doc = Document::parse(text).map_err(|e| IngestError::Xml(e.to_string()))?;
    let root = doc.root_element();
    let tag = root.tag_name().name();
    if tag != "testsuites" && tag != "testsuite" {
        return Err(IngestError::Xml(format!(
            "expected <testsuites> or <testsuite> root, found <{tag}>"
        )));
    }
    let build_id = ctx
        .build_id
        .clone()
        .or_else(|| {
            (tag == "testsuites")
                .then(|| root.attribute("name"))
                .flatten()
                .map(str::to_string)
        })
        .unwrap_or_else(|| "unknown".to_string());

    let mut out = ParseOutcome::default();
    let leaves = root
        .descendants()
        .filter(|n| n.has_tag_name("testsuite"))
        .filter(|n| !n.children().any(|c| c.has_tag_name("testsuite")));
    for (i, suite) in leaves.enumerate() {
        match test_run(suite, &build_id, ctx) {
            Ok(rec) => out.push(rec),
            Err(msg) => {
                let name = suite.attribute("name").unwrap_or("?");
                out.warnings
                    .push(format!("testsuite #{} ({name}): {msg}; skipped", i + 1));
            }
        }
    }
    Ok(out)
}

fn test_run(suite: Node<'_, '_>, build_id: &str, ctx: &IngestContext) -> Result<RawRecord, String> {
    let count = |attr: &str, required: bool| -> Result<u64, String> {
        match suite.attribute(attr) {
            None if required => Err(format!("missing attribute `{attr}`")),
            None => Ok(0),
            Some(v) => v
                .trim()
                .parse::<u64>()
                .map_err(|_| format!("attribute `{attr}` is not a count: {v:?}")),
        }
    };
    let total = count("tests", true)?;
    let failures = count("failures", false)?;
    let errors = count("errors", false)?;
    let skipped = match suite.attribute("skipped") {
        Some(_) => count("skipped", false)?,
        None => count("disabled", false)?,
    };
    let time = suite
        .attribute("time")
        .ok_or("missing attribute `time`")?;
    let duration_sec: f64 = time
        .trim()
        .replace(',', "")
        .parse()
        .map_err(|_| format!("attribute `time` is not a number: {time:?}"))?;
    let timestamp = match suite.attribute("timestamp") {
        None => ctx.default_timestamp,
        Some(t) => parse_instant(t).ok_or_else(|| format!("unreadable timestamp {t:?}"))?,
    };
    let name = suite.attribute("name").unwrap_or("").to_string();
    let record_id = derive_record_id("testrun", &[build_id, &name, &stamp(&timestamp)]);
    Ok(RawRecord::new(
        record_id,
        ctx.project.clone(),
        timestamp,
        Payload::TestRun(TestRun {
            build_id: build_id.to_string(),
            suite: name,
            total,
            errors,
            failures,
            skipped,
            duration_sec,
        }),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::{TimeZone, Utc};

    fn ctx() -> IngestContext {
        IngestContext::new("p", Utc.with_ymd_and_hms(2018, 1, 1, 0, 0, 0).unwrap())
    }

    fn run(r: &RawRecord) -> &TestRun {
        match &r.payload {
            Payload::TestRun(t) => t,
            _ => panic!("not a test run"),
        }
    }

    #[test]
    fn attribute_mapping() {
        let xml = r#"<testsuite name="s" tests="10" failures="1" errors="0" skipped="2" time="3.5"/>"#;
        let out = parse_test_report_xml(xml, &ctx()).unwrap();
        assert!(out.warnings.is_empty());
        let t = run(&out.records[0]);
        assert_eq!(
            (t.total, t.failures, t.errors, t.skipped, t.duration_sec),
            (10, 1, 0, 2, 3.5)
        );
        assert_eq!(t.build_id, "unknown");
    }

    #[test]
    fn empty_suites() {
        let out = parse_test_report_xml("<testsuites/>", &ctx()).unwrap();
        assert!(out.records.is_empty() && out.warnings.is_empty());
    }

    #[test]
    fn missing_tests_attribute_is_a_warning() {
        let xml = r#"<testsuites name="b7">
            <testsuite name="ok" tests="1" time="1"/>
            <testsuite name="bad" time="1"/>
        </testsuites>"#;
        let out = parse_test_report_xml(xml, &ctx()).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(run(&out.records[0]).build_id, "b7");
        assert_eq!(out.warnings.len(), 1);
        assert!(out.warnings[0].contains("missing attribute `tests`"));
    }

    #[test]
    fn nested_suites_use_leaves() {
        let xml = r#"<testsuites><testsuite name="outer" tests="5" time="2">
            <testsuite name="a" tests="2" time="1"/><testsuite name="b" tests="3" time="1"/>
        </testsuite></testsuites>"#;
        let out = parse_test_report_xml(xml, &ctx()).unwrap();
        let names: Vec<_> = out.records.iter().map(|r| run(r).suite.clone()).collect();
        assert_eq!(names, ["a", "b"]);
    }

    #[test]
    fn malformed_xml_is_an_error() {
        assert!(parse_test_report_xml("<testsuites>", &ctx()).is_err());
        assert!(parse_test_report_xml("\u{1}\u{2}garbage", &ctx()).is_err());
        assert!(parse_test_report_xml("<html/>", &ctx()).is_err());
    }

    #[test]
    fn inconsistent_counts_are_skipped() {
        let xml = r#"<testsuite name="s" tests="2" failures="3" time="1"/>"#;
        let out = parse_test_report_xml(xml, &ctx()).unwrap();
        assert!(out.records.is_empty());
        assert_eq!(out.warnings.len(), 1);
    }

    #[test]
    fn deterministic_ids() {
        let xml = r#"<testsuite name="s" tests="1" time="1" timestamp="2018-01-03T00:00:00"/>"#;
        let a = parse_test_report_xml(xml, &ctx()).unwrap();
        let b = parse_test_report_xml(xml, &ctx()).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            a.records[0].timestamp,
            Utc.with_ymd_and_hms(2018, 1, 3, 0, 0, 0).unwrap()
        );
    }
}
