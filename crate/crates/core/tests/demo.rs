//! The bundled two-window demo against values worked out by hand from the
//! fixture files.

use chrono::{DateTime, TimeZone, Utc};
use qgauge_core::alerts::ThresholdCrossed;
use qgauge_core::assessment::AssessmentRequest;
use qgauge_core::engine::Engine;
use qgauge_core::ingest::Format;
use qgauge_core::model::{Color, Stratum};
use qgauge_core::records::Window;

const ROOT: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../");

fn day(d: u32) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2018, 1, d, 0, 0, 0).unwrap()
}

fn w1() -> Window {
    Window::new(day(1), day(15))
}

fn w2() -> Window {
    Window::new(day(15), day(29))
}

const FILES: [(Format, &str); 6] = [
    (Format::Static, "static.json"),
    (Format::Commits, "commits.log"),
    (Format::TestXml, "tests.xml"),
    (Format::Issues, "issues.csv"),
    (Format::Logs, "app.log"),
    (Format::Records, "events.jsonl"),
];

fn load(engine: &Engine, window: &str) {
    let ctx = engine.ingest_context(day(1));
    for (format, name) in FILES {
        let text = std::fs::read_to_string(format!("{ROOT}fixtures/demo/{window}/{name}")).unwrap();
        let report = engine.ingest(format, &text, &ctx).unwrap();
        assert!(report.warnings.is_empty(), "{window}/{name}: {:?}", report.warnings);
        assert!(report.inserted > 0, "{window}/{name}");
    }
}

fn engine(dir: &std::path::Path) -> Engine {
    Engine::open(format!("{ROOT}models/qrapids.json"), dir, "demo").unwrap()
}

const W1_VALUES: &[(&str, f64)] = &[
    ("non_complex_files", 1.0),
    ("commented_files", 0.9),
    ("absence_of_duplications", 1.0),
    ("fulfillment_critical_blocker_rules", 0.9),
    ("highly_changed_files", 1.0),
    ("passed_tests", 1.0),
    ("fast_test_builds", 1.0),
    ("test_coverage", 1.0),
    ("non_bug_density", 1.0),
    ("errors_at_runtime", 0.8),
    ("availability_uptime", 1.0),
    ("feature_usage", 0.8),
    ("resolved_issues_dated", 1.0),
    ("issues_completely_specified", 0.8),
    ("code_quality", 0.97),
    ("blocking_code", 0.95),
    ("testing_status", 1.0),
    ("software_stability", 0.94),
    ("software_usage", 0.8),
    ("issues_velocity", 0.9),
    ("maintainability", 0.96),
    ("reliability", 0.97),
    ("functional_suitability", 0.8),
    ("productivity", 0.9),
];

const W2_VALUES: &[(&str, f64, Color)] = &[
    ("non_complex_files", 0.9, Color::Green),
    ("commented_files", 0.9, Color::Green),
    ("absence_of_duplications", 0.9, Color::Green),
    ("fulfillment_critical_blocker_rules", 0.2, Color::Red),
    ("highly_changed_files", 4.0 / 6.0, Color::Orange),
    ("passed_tests", 0.5, Color::Orange),
    ("fast_test_builds", 0.5, Color::Orange),
    ("test_coverage", 0.5, Color::Orange),
    ("non_bug_density", 0.25, Color::Red),
    ("errors_at_runtime", 0.0, Color::Red),
    ("availability_uptime", 0.0, Color::Red),
    ("feature_usage", 0.6, Color::Orange),
    ("resolved_issues_dated", 1.0, Color::Green),
    ("issues_completely_specified", 0.5, Color::Orange),
    ("code_quality", 0.9, Color::Green),
    ("blocking_code", 0.1 + 1.0 / 3.0, Color::Red),
    ("testing_status", 0.5, Color::Orange),
    ("software_stability", 0.1, Color::Red),
    ("software_usage", 0.6, Color::Orange),
    ("issues_velocity", 0.75, Color::Green),
    ("maintainability", 0.45 + 0.5 * (0.1 + 1.0 / 3.0), Color::Orange),
    ("reliability", 0.3, Color::Red),
    ("functional_suitability", 0.6, Color::Orange),
    ("productivity", 0.75, Color::Green),
];

#[test]
fn two_windows_match_hand_values() {
    let dir = tempfile::tempdir().unwrap();
    let engine = engine(dir.path());
    load(&engine, "window1");
    load(&engine, "window2");

    let first = engine.assess(&AssessmentRequest::explicit(w1(), day(15))).unwrap();
    assert!(first.alerts.is_empty(), "{:?}", first.alerts);
    assert_eq!(first.snapshot.entries.len(), W1_VALUES.len());
    for (id, want) in W1_VALUES {
        let got = first.snapshot.value(id).unwrap();
        assert!((got - want).abs() < 1e-9, "w1 {id}: {got} vs {want}");
        assert_eq!(first.snapshot.color(id), Some(Color::Green), "w1 {id}");
    }

    let second = engine.assess(&AssessmentRequest::explicit(w2(), day(29))).unwrap();
    for (id, want, color) in W2_VALUES {
        let got = second.snapshot.value(id).unwrap();
        assert!((got - want).abs() < 1e-9, "w2 {id}: {got} vs {want}");
        assert_eq!(second.snapshot.color(id), Some(*color), "w2 {id}");
    }

    let maint: Vec<_> = second.alerts.iter().filter(|a| a.element_id == "maintainability").collect();
    assert_eq!(maint.len(), 1);
    assert_eq!(maint[0].transition(), "green→orange");
    assert_eq!(maint[0].threshold_crossed, ThresholdCrossed::Warning);
    let rel = second.alerts.iter().find(|a| a.element_id == "reliability").unwrap();
    assert_eq!(rel.transition(), "green→red");
    assert_eq!(rel.threshold_crossed, ThresholdCrossed::Critical);
    let alerted = W2_VALUES.iter().filter(|(_, _, c)| *c != Color::Green).count();
    assert_eq!(second.alerts.len(), alerted);
    assert_eq!(second.alerts[0].stratum, Stratum::Aspect);
}

#[test]
fn drilldown_explains_the_demo() {
    let dir = tempfile::tempdir().unwrap();
    let engine = engine(dir.path());
    load(&engine, "window2");
    engine.assess(&AssessmentRequest::explicit(w2(), day(29))).unwrap();

    let maint = engine.drilldown("maintainability").unwrap();
    let kids: Vec<_> = maint.children.iter().map(|c| c.element_id.as_str()).collect();
    assert_eq!(kids, ["blocking_code", "code_quality"]);
    let blocking = &maint.children[0];
    let worst = &blocking.children[0];
    assert_eq!(worst.element_id, "fulfillment_critical_blocker_rules");
    assert_eq!(worst.offenders.len(), 8);
    let hc = &blocking.children[1];
    let entities: Vec<_> = hc.offenders.iter().map(|o| o.entity.as_str()).collect();
    assert_eq!(entities, ["src/core/engine.c", "src/core/parser.c"]);
    assert_eq!(hc.offenders[0].base_value, 6.0);

    let stability = engine.drilldown("software_stability").unwrap();
    let errors = stability
        .children
        .iter()
        .find(|c| c.element_id == "errors_at_runtime")
        .unwrap();
    assert_eq!(errors.raw_summary["runtime_errors"], 12.0);
    assert_eq!(errors.offenders[0].entity, "api/handler.c:118");
    assert_eq!(errors.offenders[0].base_value, 10.0);
    let avail = stability
        .children
        .iter()
        .find(|c| c.element_id == "availability_uptime")
        .unwrap();
    assert_eq!(avail.raw_summary["uptime_pct"], 97.0);
    assert_eq!(avail.raw_summary["recoveries"], 2.0);
    // down at samples 30 and 60-61, three hours apart: recoveries at 31 and 62
    assert_eq!(avail.raw_summary["mean_time_between_failures_sec"], 31.0 * 3.0 * 3600.0);
}

#[test]
fn complexity_and_comment_boundaries() {
    let dir = tempfile::tempdir().unwrap();
    let engine = engine(dir.path());
    load(&engine, "window2");
    let out = engine.assess(&AssessmentRequest::explicit(w2(), day(29))).unwrap();
    // parser.c has mean complexity 9.9, engine.c exactly 10
    let cc = &out.snapshot.entries["non_complex_files"];
    let names: Vec<_> = cc.offenders.iter().map(|o| o.entity.as_str()).collect();
    assert_eq!(names, ["src/core/engine.c"]);
    assert_eq!(cc.offenders[0].base_value, 10.0);
    // engine.c sits at 10 % comments and parser.c at 30 %, both inside the band
    let cm = &out.snapshot.entries["commented_files"];
    let names: Vec<_> = cm.offenders.iter().map(|o| o.entity.as_str()).collect();
    assert_eq!(names, ["src/util/str.c"]);
}

#[test]
fn reingesting_the_demo_adds_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let engine = engine(dir.path());
    load(&engine, "window1");
    let before = engine.store().raw_count();
    let ctx = engine.ingest_context(day(1));
    for (format, name) in FILES {
        let text = std::fs::read_to_string(format!("{ROOT}fixtures/demo/window1/{name}")).unwrap();
        let report = engine.ingest(format, &text, &ctx).unwrap();
        assert_eq!(report.inserted, 0, "{name}");
    }
    assert_eq!(engine.store().raw_count(), before);
}

#[test]
fn graded_model_scores_complexity_linearly() {
    let dir = tempfile::tempdir().unwrap();
    let engine = Engine::open(format!("{ROOT}models/qrapids-graded.json"), dir.path(), "demo").unwrap();
    load(&engine, "window1");
    let out = engine.assess(&AssessmentRequest::explicit(w1(), day(15))).unwrap();
    // per-file mean complexities in window 1
    let means = [4.0, 4.0, 4.0, 2.0, 6.0, 3.0, 1.5, 3.0, 6.0, 2.0];
    let want = means.iter().map(|m| 1.0 - m / 10.0).sum::<f64>() / means.len() as f64;
    let got = out.snapshot.value("non_complex_files").unwrap();
    assert!((got - want).abs() < 1e-12, "{got} vs {want}");
}
