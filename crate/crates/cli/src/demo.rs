//! The bundled two-window walkthrough. Window 1 is healthy; in window 2 two
//! core files are changed over and over and pick up blocker violations,
//! while the service starts failing under load.

use std::path::Path;

use anyhow::{Context, Result};
use chrono::{TimeZone, Utc};
use qgauge_core::assessment::AssessmentRequest;
use qgauge_core::engine::{AssessmentOutcome, Engine};
use qgauge_core::ingest::Format;
use qgauge_core::model::Stratum;
use qgauge_core::records::Window;
use serde_json::json;

use crate::output;

const MODEL: &str = include_str!("../../../models/qrapids.json");

macro_rules! window_files {
    ($dir:literal) => {
        [
            (Format::Static, "static.json", include_str!(concat!("../../../fixtures/demo/", $dir, "/static.json"))),
            (Format::Commits, "commits.log", include_str!(concat!("../../../fixtures/demo/", $dir, "/commits.log"))),
            (Format::TestXml, "tests.xml", include_str!(concat!("../../../fixtures/demo/", $dir, "/tests.xml"))),
            (Format::Issues, "issues.csv", include_str!(concat!("../../../fixtures/demo/", $dir, "/issues.csv"))),
            (Format::Logs, "app.log", include_str!(concat!("../../../fixtures/demo/", $dir, "/app.log"))),
            (Format::Records, "events.jsonl", include_str!(concat!("../../../fixtures/demo/", $dir, "/events.jsonl"))),
        ]
    };
}

type Files = [(Format, &'static str, &'static str); 6];

const CONFIG: &str = r#"{
  "store": "store",
  "model": "model.json",
  "project": "demo"
}
"#;

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn windows() -> [(&'static str, Window, Files); 2] {
    let day = |d| Utc.with_ymd_and_hms(2018, 1, d, 0, 0, 0).unwrap();
    [
        ("window1", Window::new(day(1), day(15)), window_files!("window1")),
        ("window2", Window::new(day(15), day(29)), window_files!("window2")),
    ]
}

pub fn run(target: &Path, json: bool) -> Result<()> {
    write(&target.join("model.json"), MODEL)?;
    write(&target.join("config.json"), CONFIG)?;
    for (name, _, files) in windows() {
        for (_, file, text) in files {
            write(&target.join("data").join(name).join(file), text)?;
        }
    }
    let engine = Engine::open(target.join("model.json"), target.join("store"), "demo")?;

    let mut outcomes: Vec<(&str, AssessmentOutcome)> = Vec::new();
    for (name, window, files) in windows() {
        let ctx = engine.ingest_context(Utc::now());
        for (format, file, text) in files {
            let r = engine.ingest(format, text, &ctx)?;
            if !json {
                outln!("{name}/{file}: inserted {}, duplicates {}", r.inserted, r.duplicates);
            }
        }
        let out = engine.assess(&AssessmentRequest::explicit(window, Utc::now()))?;
        if !json {
            outln!(
                "\n== {name} [{}, {}) ==",
                window.from.format("%Y-%m-%d"),
                window.to.format("%Y-%m-%d")
            );
            for (id, e) in out.snapshot.stratum(Stratum::Aspect) {
                outln!("{id} {} {}", output::value(e.value), e.color);
            }
            for a in &out.alerts {
                outln!("{}", output::alert_line(a));
            }
            outln!();
        }
        outcomes.push((name, out));
    }

    if json {
        let doc: serde_json::Map<_, _> = outcomes
            .iter()
            .map(|(name, o)| (name.to_string(), json!(o)))
            .collect();
        outln!("{}", serde_json::to_string_pretty(&doc)?);
        return Ok(());
    }
    let last = &outcomes[1].1;
    for aspect in ["maintainability", "reliability"] {
        if let Some(a) = last.alerts.iter().find(|a| a.element_id == aspect) {
            outln!("{aspect} went {}; drill-down, worst first:", a.transition());
            out!("{}", output::drilldown(&engine.drilldown(aspect)?, 5));
            outln!();
        }
    }
    outln!(
        "store: {}\nnext: QGAUGE_CONFIG={} qgauge report",
        target.join("store").display(),
        target.join("config.json").display()
    );
    Ok(())
}
