use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::Serialize;

use super::{QualityModel, Stratum};

/// Allowed deviation of a parent's child-weight sum from 1.
pub const WEIGHT_TOLERANCE: f64 = 1e-6;

/// A broken model rule, naming the element it was found on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub element: String,
    pub rule: &'static str,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

fn fmt_sum(sum: f64) -> String {
    let rounded = (sum * 1e6).round() / 1e6;
    format!("{rounded}")
}

/// Lists every invariant the model breaks. An empty list means the model is
/// usable for assessment.
pub fn validate_model(m: &QualityModel) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |element: &str, rule: &'static str, message: String| {
        out.push(Violation {
            element: element.to_string(),
            rule,
            message,
        })
    };

    if m.default_window_days == 0 {
        push(
            "model",
            "window",
            "default_window_days must be positive".into(),
        );
    }
    if m.aspects.is_empty() {
        push("model", "structure", "model has no aspects".into());
    }
    for dup in m.duplicate_ids() {
        push(&dup, "unique_id", format!("duplicate id {dup}"));
    }

    for (id, t) in m
        .aspects
        .iter()
        .chain(m.factors.iter())
        .map(|e| (&e.id, e.thresholds))
        .chain(m.metrics.iter().map(|x| (&x.id, x.thresholds)))
    {
        if !t.is_valid() {
            push(
                id,
                "thresholds",
                format!(
                    "thresholds of {id} must satisfy 0 <= critical ({}) <= warning ({}) <= 1",
                    t.critical, t.warning
                ),
            );
        }
    }

    for metric in &m.metrics {
        let id = &metric.id;
        if metric.window_days == 0 {
            push(id, "window", format!("window_days of {id} must be positive"));
        }
        if metric.source_kind != metric.extractor.source_kind() {
            push(
                id,
                "source_kind",
                format!(
                    "metric {id} reads {} but extractor {} needs {}",
                    metric.source_kind,
                    metric.extractor,
                    metric.extractor.source_kind()
                ),
            );
        }
        for problem in metric.utility.problems() {
            push(id, "utility", format!("utility of {id}: {problem}"));
        }
        let defaults = metric.extractor.default_params();
        for (key, default) in &defaults {
            match metric.params.get(key) {
                None => push(id, "params", format!("metric {id} is missing param {key}")),
                Some(v) if std::mem::discriminant(v) != std::mem::discriminant(default) => push(
                    id,
                    "params",
                    format!("param {key} of metric {id} has the wrong type"),
                ),
                Some(_) => {}
            }
        }
        if let Some(top_n) = metric.params.get("top_n") {
            if !top_n.as_number().is_some_and(|n| n >= 0.0 && n.fract() == 0.0) {
                push(
                    id,
                    "params",
                    format!("param top_n of metric {id} must be a non-negative integer"),
                );
            }
        }
    }

    let mut seen_edges = HashSet::new();
    let mut sums: BTreeMap<&str, f64> = BTreeMap::new();
    for edge in &m.edges {
        let label = format!("{} <- {}", edge.parent, edge.child);
        let parent = m.stratum_of(&edge.parent);
        let child = m.stratum_of(&edge.child);
        match (parent, child) {
            (None, _) => push(
                &edge.parent,
                "edge",
                format!("edge {label} has unknown parent {}", edge.parent),
            ),
            (_, None) => push(
                &edge.child,
                "edge",
                format!("edge {label} has unknown child {}", edge.child),
            ),
            (Some(p), Some(c)) if p.child() != Some(c) => push(
                &edge.parent,
                "edge",
                format!("edge {label} connects {p} to {c}; only adjacent strata may be linked"),
            ),
            _ => {}
        }
        if !(edge.weight > 0.0 && edge.weight <= 1.0) {
            push(
                &edge.parent,
                "weight",
                format!("edge {label} weight {} outside (0,1]", edge.weight),
            );
        }
        if !seen_edges.insert((edge.parent.as_str(), edge.child.as_str())) {
            push(&edge.parent, "edge", format!("edge {label} declared twice"));
        }
        *sums.entry(edge.parent.as_str()).or_default() += edge.weight;
    }
    for (parent, sum) in &sums {
        if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
            push(
                parent,
                "weight_sum",
                format!("weights sum {} ≠ 1 for parent {parent}", fmt_sum(*sum)),
            );
        }
    }

    for a in &m.aspects {
        if !m
            .children_of(&a.id)
            .any(|e| m.stratum_of(&e.child) == Some(Stratum::Factor))
        {
            push(&a.id, "structure", format!("aspect {} has no factors", a.id));
        }
    }
    for f in &m.factors {
        if !m
            .children_of(&f.id)
            .any(|e| m.stratum_of(&e.child) == Some(Stratum::Metric))
        {
            push(&f.id, "structure", format!("factor {} has no metrics", f.id));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::tests::MINI;
    use super::super::*;

    fn mini() -> QualityModel {
        parse_model(MINI).unwrap()
    }

    #[test]
    fn weights_off() {
        let mut m = mini();
        m.edges[0].weight = 0.6;
        m.edges[1].weight = 0.6;
        let v = validate_model(&m);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].message, "weights sum 1.2 ≠ 1 for parent maintainability");
        assert_eq!(v[0].element, "maintainability");
    }

    #[test]
    fn childless_factor() {
        let mut m = mini();
        m.factors.push(ElementDef {
            id: "testing_status".into(),
            name: "Testing status".into(),
            description: String::new(),
            thresholds: Thresholds::default(),
        });
        let v = validate_model(&m);
        assert!(v
            .iter()
            .any(|x| x.message == "factor testing_status has no metrics"));
    }

    #[test]
    fn non_adjacent_edge() {
        let mut m = mini();
        m.edges[0].weight = 0.25;
        m.edges.push(Edge {
            parent: "maintainability".into(),
            child: "non_complex_files".into(),
            weight: 0.25,
        });
        let v = validate_model(&m);
        assert!(v.iter().any(|x| x.rule == "edge"), "{v:?}");
    }

    #[test]
    fn bad_thresholds_and_utility() {
        let mut m = mini();
        m.aspects[0].thresholds = Thresholds::new(0.2, 0.5);
        m.metrics[0].utility = UtilityFunction::linear(vec![(5.0, 1.0), (1.0, 0.0)]);
        let rules: Vec<_> = validate_model(&m).into_iter().map(|v| v.rule).collect();
        assert!(rules.contains(&"thresholds"));
        assert!(rules.contains(&"utility"));
    }

    #[test]
    fn missing_param() {
        let mut m = mini();
        m.metrics[0].params.clear();
        let v = validate_model(&m);
        assert!(v
            .iter()
            .any(|x| x.message.contains("missing param complexity_threshold")));
    }

    #[test]
    fn tolerance_accepts_thirds() {
        let mut m = mini();
        m.edges[0].weight = 0.3333333;
        m.edges[1].weight = 0.6666667;
        assert!(validate_model(&m).is_empty());
    }
}
