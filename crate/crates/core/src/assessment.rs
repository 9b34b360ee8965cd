//! Bottom-up evaluation: metrics, then factors, then aspects.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{compute_assessed_metric, MetricError};
use crate::model::{
    classify_color, validate_model, ParamValue, QualityModel, Stratum, Thresholds,
    UtilityFunction, Violation,
};
use crate::records::Window;
use crate::snapshot::{Snapshot, SnapshotEntry};
use crate::store::{Store, StoreError};

pub use crate::schedule::{schedule_assessments, ScheduleError, ScheduleHandle, ScheduleStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    #[default]
    Manual,
    Scheduled,
}

/// Which raw records an assessment reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WindowSpec {
    /// The same range for every metric.
    Explicit { from: DateTime<Utc>, to: DateTime<Utc> },
    /// The `days` before the evaluation instant; without `days` each metric
    /// uses its own `window_days`.
    Trailing {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        days: Option<u32>,
    },
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec::Trailing { days: None }
    }
}

impl From<Window> for WindowSpec {
    fn from(w: Window) -> Self {
        WindowSpec::Explicit {
            from: w.from,
            to: w.to,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentRequest {
    pub window: WindowSpec,
    #[serde(default)]
    pub trigger: Trigger,
    /// Evaluation instant; trailing windows end here.
    pub evaluated_at: DateTime<Utc>,
}

impl AssessmentRequest {
    pub fn explicit(window: Window, evaluated_at: DateTime<Utc>) -> Self {
        AssessmentRequest {
            window: window.into(),
            trigger: Trigger::Manual,
            evaluated_at,
        }
    }

    pub fn trailing(days: Option<u32>, evaluated_at: DateTime<Utc>) -> Self {
        AssessmentRequest {
            window: WindowSpec::Trailing { days },
            trigger: Trigger::Manual,
            evaluated_at,
        }
    }

    /// The window recorded on the snapshot.
    pub fn snapshot_window(&self, model: &QualityModel) -> Window {
        match self.window {
            WindowSpec::Explicit { from, to } => Window::new(from, to),
            WindowSpec::Trailing { days } => Window::trailing_days(
                self.evaluated_at,
                days.unwrap_or(model.default_window_days),
            ),
        }
    }

    /// The window a metric reads, given its own `window_days`.
    pub fn metric_window(&self, window_days: u32) -> Window {
        match self.window {
            WindowSpec::Explicit { from, to } => Window::new(from, to),
            WindowSpec::Trailing { days } => {
                Window::trailing_days(self.evaluated_at, days.unwrap_or(window_days))
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum AssessmentError {
    #[error("invalid model: {}", join_violations(.0))]
    InvalidModel(Vec<Violation>),
    #[error("invalid window: from {from} is not before to {to}")]
    InvalidWindow {
        from: DateTime<Utc>,
        to: DateTime<Utc>,
    },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("invalid what-if delta: {0}")]
    Delta(String),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.message.as_str())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Weighted mean of the children that have data, with their weights scaled
/// to sum to 1. `None` when no child has data.
pub fn aggregate_children(children: &[(Option<f64>, f64)]) -> Option<f64> {
    let with_data: Vec<(f64, f64)> = children
        .iter()
        .filter_map(|(v, w)| v.map(|v| (v, *w)))
        .collect();
    match with_data.as_slice() {
        [] => None,
        [(v, _)] => Some(*v),
        many => {
            let total: f64 = many.iter().map(|(_, w)| w).sum();
            let sum: f64 = many.iter().map(|(v, w)| v * w).sum();
            Some((sum / total).clamp(0.0, 1.0))
        }
    }
}

fn entry(stratum: Stratum, value: Option<f64>, t: &Thresholds) -> SnapshotEntry {
    SnapshotEntry {
        stratum,
        value,
        color: classify_color(value, t),
        n_entities: 0,
        raw_summary: BTreeMap::new(),
        offenders: Vec::new(),
    }
}

/// Evaluates the model without persisting anything. The snapshot gets a
/// fresh id and is marked non-transient; [`what_if`] flips that flag.
pub fn evaluate(
    model: &QualityModel,
    store: &Store,
    req: &AssessmentRequest,
) -> Result<Snapshot, AssessmentError> {
    let violations = validate_model(model);
    if !violations.is_empty() {
        return Err(AssessmentError::InvalidModel(violations));
    }
    let window = req.snapshot_window(model);
    if window.from >= window.to {
        return Err(AssessmentError::InvalidWindow {
            from: window.from,
            to: window.to,
        });
    }

    let mut entries = BTreeMap::new();
    for def in &model.metrics {
        let w = req.metric_window(def.window_days);
        let mv = compute_assessed_metric(def, store.raw_iter(def.source_kind, &w), &w)?;
        let mut e = entry(Stratum::Metric, mv.value, &def.thresholds);
        e.n_entities = mv.n_entities;
        e.raw_summary = mv.raw_summary;
        e.offenders = mv.offenders;
        entries.insert(def.id.clone(), e);
    }
    for (stratum, elements) in [
        (Stratum::Factor, &model.factors),
        (Stratum::Aspect, &model.aspects),
    ] {
        for el in elements {
            let children: Vec<(Option<f64>, f64)> = model
                .children_of(&el.id)
                .map(|edge| {
                    let v = entries.get(&edge.child).and_then(|c: &SnapshotEntry| c.value);
                    (v, edge.weight)
                })
                .collect();
            let mut e = entry(stratum, aggregate_children(&children), &el.thresholds);
            e.n_entities = children.iter().filter(|(v, _)| v.is_some()).count();
            entries.insert(el.id.clone(), e);
        }
    }

    Ok(Snapshot {
        snapshot_id: uuid::Uuid::new_v4().to_string(),
        evaluated_at: req.evaluated_at,
        window,
        transient: false,
        entries,
    })
}

/// Evaluates the model and persists the snapshot.
pub fn run_assessment(
    model: &QualityModel,
    store: &mut Store,
    req: &AssessmentRequest,
) -> Result<Snapshot, AssessmentError> {
    let snapshot = evaluate(model, store, req)?;
    store.save_snapshot(&snapshot)?;
    Ok(snapshot)
}

/// Replacements applied on top of a model for a what-if run.
///
/// `weights` maps a parent id to new weights of some or all of its existing
/// child edges; `params` entries are merged into the metric's params.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhatIfDelta {
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub weights: BTreeMap<String, BTreeMap<String, f64>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub utilities: BTreeMap<String, UtilityFunction>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub thresholds: BTreeMap<String, Thresholds>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, BTreeMap<String, ParamValue>>,
}

impl WhatIfDelta {
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
            && self.utilities.is_empty()
            && self.thresholds.is_empty()
            && self.params.is_empty()
    }

    /// The model with the delta applied and validated.
    pub fn apply(&self, model: &QualityModel) -> Result<QualityModel, AssessmentError> {
        let mut m = model.clone();
        for (parent, children) in &self.weights {
            for (child, weight) in children {
                let edge = m
                    .edges
                    .iter_mut()
                    .find(|e| &e.parent == parent && &e.child == child)
                    .ok_or_else(|| {
                        AssessmentError::Delta(format!("no edge {parent} <- {child}"))
                    })?;
                edge.weight = *weight;
            }
        }
        for (id, t) in &self.thresholds {
            if !m.set_thresholds(id, *t) {
                return Err(AssessmentError::Delta(format!("unknown element {id}")));
            }
        }
        for (id, params) in &self.params {
            let def = m
                .metric_mut(id)
                .ok_or_else(|| AssessmentError::Delta(format!("unknown metric {id}")))?;
            // a utility still derived from the old params follows them
            let derived = def.utility == def.extractor.default_utility(&def.params);
            def.params
                .extend(params.iter().map(|(k, v)| (k.clone(), v.clone())));
            if derived {
                def.utility = def.extractor.default_utility(&def.params);
            }
        }
        for (id, u) in &self.utilities {
            let def = m
                .metric_mut(id)
                .ok_or_else(|| AssessmentError::Delta(format!("unknown metric {id}")))?;
            def.utility = u.clone();
        }
        let violations = validate_model(&m);
        if !violations.is_empty() {
            return Err(AssessmentError::InvalidModel(violations));
        }
        Ok(m)
    }
}

/// Evaluates the model under `delta` without touching the store. The
/// result is marked transient.
pub fn what_if(
    model: &QualityModel,
    store: &Store,
    req: &AssessmentRequest,
    delta: &WhatIfDelta,
) -> Result<Snapshot, AssessmentError> {
    let modified = delta.apply(model)?;
    let mut snapshot = evaluate(&modified, store, req)?;
    snapshot.transient = true;
    Ok(snapshot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_model, Color};
    use crate::records::{FileMeasure, Payload, RawRecord};
    use chrono::TimeZone;
    use proptest::prelude::*;

    #[test]
    fn aggregate_examples() {
        let v = aggregate_children(&[(Some(0.8), 0.5), (Some(0.4), 0.5)]).unwrap();
        assert!((v - 0.6).abs() < 1e-12);
        let v = aggregate_children(&[(Some(0.9), 0.6), (None, 0.4)]).unwrap();
        assert!((v - 0.9).abs() < 1e-12);
        assert_eq!(aggregate_children(&[(Some(0.37), 1.0)]), Some(0.37));
        assert_eq!(aggregate_children(&[(None, 0.5), (None, 0.5)]), None);
        assert_eq!(aggregate_children(&[]), None);
    }

    proptest! {
        #[test]
        fn aggregate_is_bounded(children in prop::collection::vec(
            (prop::option::of(0.0f64..=1.0), 0.001f64..1.0), 1..12)
        ) {
            if let Some(v) = aggregate_children(&children) {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn single_data_child_passes_through(v in 0.0f64..=1.0, w in 0.01f64..1.0, n in 0usize..5) {
            let mut children = vec![(None, 0.1); n];
            children.push((Some(v), w));
            prop_assert_eq!(aggregate_children(&children), Some(v));
        }

        #[test]
        fn shifting_weight_to_worst_never_raises(
            values in prop::collection::vec(0.0f64..=1.0, 2..8),
            raw in prop::collection::vec(0.05f64..1.0, 8),
            shift in 0.0f64..1.0,
        ) {
            let n = values.len();
            let total: f64 = raw[..n].iter().sum();
            let weights: Vec<f64> = raw[..n].iter().map(|w| w / total).collect();
            let worst = (0..n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
            let before: Vec<_> = values.iter().copied().map(Some).zip(weights.iter().copied()).collect();
            // take a share of every other weight and give it to the worst child
            let mut shifted = weights.clone();
            let mut moved = 0.0;
            for (i, w) in shifted.iter_mut().enumerate() {
                if i != worst {
                    moved += *w * shift;
                    *w -= *w * shift;
                }
            }
            shifted[worst] += moved;
            let after: Vec<_> = values.iter().copied().map(Some).zip(shifted).collect();
            prop_assert!(aggregate_children(&after).unwrap() <= aggregate_children(&before).unwrap() + 1e-12);
        }
    }

    fn at(d: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2018, 1, d, 0, 0, 0).unwrap()
    }

    fn file(path: &str, cc: &[u64], day: u32) -> RawRecord {
        RawRecord::new(
            format!("{path}-{day}"),
            "p",
            at(day),
            Payload::FileMeasure(FileMeasure {
                path: path.into(),
                loc: 100,
                comment_lines: 20,
                duplicated_lines: 0,
                function_complexities: cc.to_vec(),
                violations: vec![],
                line_coverage: None,
                condition_coverage: None,
            }),
        )
    }

    fn mini_store() -> (tempfile::TempDir, Store) {
        let dir = tempfile::tempdir().unwrap();
        let mut store = Store::open(dir.path(), "p").unwrap();
        store
            .append(vec![file("a.c", &[2], 3), file("b.c", &[6], 3), file("c.c", &[12], 3)])
            .unwrap();
        (dir, store)
    }

    #[test]
    fn runs_bottom_up() {
        let model = parse_model(crate::model::tests::MINI).unwrap();
        let (_dir, mut store) = mini_store();
        let req = AssessmentRequest::explicit(Window::new(at(1), at(15)), at(15));
        let s = run_assessment(&model, &mut store, &req).unwrap();
        let ncf = s.value("non_complex_files").unwrap();
        assert!((ncf - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.entries["non_complex_files"].n_entities, 3);
        assert_eq!(store.snapshots().len(), 1);
        assert_eq!(store.latest_snapshot().unwrap().snapshot_id, s.snapshot_id);
    }

    #[test]
    fn empty_store_is_all_no_data() {
        let model = parse_model(crate::model::tests::MINI).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let mut store = Store::open(dir.path(), "p").unwrap();
        let s = run_assessment(&model, &mut store, &AssessmentRequest::trailing(None, at(15))).unwrap();
        assert!(s.entries.values().all(|e| e.color == Color::NoData && e.value.is_none()));
        assert_eq!(store.snapshots().len(), 1);
        assert_eq!(s.window, Window::trailing_days(at(15), 14));
    }

    #[test]
    fn deterministic_values() {
        let model = parse_model(crate::model::tests::MINI).unwrap();
        let (_dir, mut store) = mini_store();
        let req = AssessmentRequest::explicit(Window::new(at(1), at(15)), at(15));
        let a = run_assessment(&model, &mut store, &req).unwrap();
        let b = run_assessment(&model, &mut store, &req).unwrap();
        assert_ne!(a.snapshot_id, b.snapshot_id);
        assert_eq!(a.entries, b.entries);
    }

    #[test]
    fn invalid_model_and_window() {
        let mut model = parse_model(crate::model::tests::MINI).unwrap();
        let (_dir, store) = mini_store();
        let bad = AssessmentRequest::explicit(Window::new(at(5), at(5)), at(15));
        assert!(matches!(evaluate(&model, &store, &bad), Err(AssessmentError::InvalidWindow { .. })));
        model.edges[0].weight = 0.9;
        let req = AssessmentRequest::trailing(None, at(15));
        assert!(matches!(evaluate(&model, &store, &req), Err(AssessmentError::InvalidModel(_))));
    }

    #[test]
    fn what_if_is_pure_and_validated() {
        let model = parse_model(crate::model::tests::MINI).unwrap();
        let (dir, store) = mini_store();
        let req = AssessmentRequest::explicit(Window::new(at(1), at(15)), at(15));
        let raw = std::fs::read(dir.path().join("raw.jsonl")).unwrap();

        let same = what_if(&model, &store, &req, &WhatIfDelta::default()).unwrap();
        assert!(same.transient);
        assert_eq!(same.entries, evaluate(&model, &store, &req).unwrap().entries);

        let delta = WhatIfDelta {
            params: BTreeMap::from([(
                "non_complex_files".to_string(),
                BTreeMap::from([("complexity_threshold".to_string(), ParamValue::Number(13.0))]),
            )]),
            ..Default::default()
        };
        assert_eq!(what_if(&model, &store, &req, &delta).unwrap().value("non_complex_files"), Some(1.0));

        let mut weights = BTreeMap::new();
        weights.insert("maintainability".to_string(), BTreeMap::from([("code_quality".to_string(), 0.7)]));
        let bad = WhatIfDelta { weights, ..Default::default() };
        match what_if(&model, &store, &req, &bad) {
            Err(AssessmentError::InvalidModel(v)) => assert!(v[0].message.contains("weights sum 1.2")),
            other => panic!("{other:?}"),
        }
        let unknown = WhatIfDelta {
            thresholds: BTreeMap::from([("nope".to_string(), Thresholds::default())]),
            ..Default::default()
        };
        assert!(matches!(what_if(&model, &store, &req, &unknown), Err(AssessmentError::Delta(_))));
        assert_eq!(std::fs::read(dir.path().join("raw.jsonl")).unwrap(), raw);
        assert!(store.snapshots().is_empty());
    }
}
