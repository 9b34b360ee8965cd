//! Plain-text tables. One row per element: `id value color`, separated by
//! single spaces so rows stay greppable.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::Path;

use qgauge_core::alerts::{Alert, DrilldownNode};
use qgauge_core::engine::IngestReport;
use qgauge_core::model::{Color, QualityModel, Stratum, Violation};
use qgauge_core::snapshot::{SeriesPoint, Snapshot};

/// Writes to stdout; a closed pipe (`qgauge report | head`) ends the
/// process quietly.
pub fn emit(text: &str) {
    use std::io::Write as _;
    let mut stdout = std::io::stdout().lock();
    if let Err(e) = stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: cannot write output: {e}");
        std::process::exit(1);
    }
}

pub fn value(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.4}"),
        None => "-".to_string(),
    }
}

fn number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{v:.0}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

pub fn summary(raw: &BTreeMap<String, f64>) -> String {
    raw.iter()
        .map(|(k, v)| format!("{k}={}", number(*v)))
        .collect::<Vec<_>>()
        .join(" ")
}

fn row(out: &mut String, id: &str, v: Option<f64>, color: Color, raw: Option<&BTreeMap<String, f64>>) {
    let _ = write!(out, "{id} {} {color}", value(v));
    if let Some(raw) = raw.filter(|r| !r.is_empty()) {
        let _ = write!(out, "  [{}]", summary(raw));
    }
    out.push('\n');
}

/// Every model element grouped by stratum; elements absent from the snapshot
/// (or all of them, without one) show as no-data.
pub fn snapshot_table(snapshot: Option<&Snapshot>, model: &QualityModel, with_raw: bool) -> String {
    let mut out = String::new();
    match snapshot {
        Some(s) => {
            let _ = writeln!(
                out,
                "snapshot {} at {} window [{}, {})",
                s.snapshot_id,
                s.evaluated_at.to_rfc3339(),
                s.window.from.to_rfc3339(),
                s.window.to.to_rfc3339()
            );
        }
        None => out.push_str("no snapshot stored\n"),
    }
    let groups: [(&str, Vec<&str>); 3] = [
        ("aspects", model.aspects.iter().map(|e| e.id.as_str()).collect()),
        ("factors", model.factors.iter().map(|e| e.id.as_str()).collect()),
        ("metrics", model.metrics.iter().map(|e| e.id.as_str()).collect()),
    ];
    for (title, ids) in groups {
        let _ = writeln!(out, "# {title}");
        for id in ids {
            match snapshot.and_then(|s| s.entries.get(id)) {
                Some(e) => row(&mut out, id, e.value, e.color, with_raw.then_some(&e.raw_summary)),
                None => row(&mut out, id, None, Color::NoData, None),
            }
        }
    }
    out
}

/// Snapshot rows without a model: aspects, factors, metrics, by id.
pub fn snapshot_entries(snapshot: Option<&Snapshot>) -> String {
    let Some(s) = snapshot else {
        return "no snapshot stored\n".to_string();
    };
    let mut out = String::new();
    for (title, stratum) in [("aspects", Stratum::Aspect), ("factors", Stratum::Factor), ("metrics", Stratum::Metric)] {
        let _ = writeln!(out, "# {title}");
        for (id, e) in s.stratum(stratum) {
            row(&mut out, id, e.value, e.color, Some(&e.raw_summary));
        }
    }
    out
}

pub fn series_table(element: &str, series: &[SeriesPoint]) -> String {
    let mut out = format!("# {element}\n");
    if series.is_empty() {
        out.push_str("no snapshots\n");
    }
    for p in series {
        let _ = writeln!(out, "{} {} {} {}", p.evaluated_at.to_rfc3339(), value(p.value), p.color, p.snapshot_id);
    }
    out
}

pub fn alert_line(a: &Alert) -> String {
    format!(
        "ALERT {} {} ({}, {} threshold)",
        a.element_id,
        a.transition(),
        value(Some(a.value)),
        match a.threshold_crossed {
            qgauge_core::alerts::ThresholdCrossed::Warning => "warning",
            qgauge_core::alerts::ThresholdCrossed::Critical => "critical",
        }
    )
}

pub fn ingest_report(r: &IngestReport) -> String {
    let mut out = format!("inserted {}, duplicates {}\n", r.inserted, r.duplicates);
    for w in &r.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    out
}

pub fn violations(path: &Path, v: &[Violation]) -> String {
    let mut out = format!("{} violation(s) in {}", v.len(), path.display());
    for x in v {
        let _ = write!(out, "\n  {}: {}", x.element, x.message);
    }
    out
}

/// Indented drill-down: children worst first, offenders under metrics.
pub fn drilldown(node: &DrilldownNode, max_offenders: usize) -> String {
    let mut out = String::new();
    walk(&mut out, node, 0, max_offenders);
    out
}

fn walk(out: &mut String, node: &DrilldownNode, depth: usize, max_offenders: usize) {
    let pad = "  ".repeat(depth);
    let _ = write!(out, "{pad}{} {} {}", node.element_id, value(node.value), node.color);
    if let Some(w) = node.weight_from_parent {
        let _ = write!(out, "  weight {}", number(w));
    }
    if let Some(c) = node.contribution {
        let _ = write!(out, " contributes {c:.4}");
    }
    out.push('\n');
    if node.stratum == Stratum::Metric {
        if !node.raw_summary.is_empty() {
            let _ = writeln!(out, "{pad}  [{}]", summary(&node.raw_summary));
        }
        for o in node.offenders.iter().take(max_offenders) {
            let _ = write!(out, "{pad}  - {} ({})", o.entity, number(o.base_value));
            if let Some(d) = &o.detail {
                let _ = write!(out, " {d}");
            }
            out.push('\n');
        }
        if node.offenders.len() > max_offenders {
            let _ = writeln!(out, "{pad}  ... {} more", node.offenders.len() - max_offenders);
        }
    }
    for c in &node.children {
        walk(out, c, depth + 1, max_offenders);
    }
}
