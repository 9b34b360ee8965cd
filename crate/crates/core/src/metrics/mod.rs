//! Assessed metrics: windowed raw records in, one normalized value out.
//!
//! Entity-based extractors score every entity (file, test run, touched path)
//! through the metric's utility function and report the mean. Scalar
//! extractors reduce the whole window to one base value and score that.

pub mod catalog;
mod extractors;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{MetricDef, ParamValue, UtilityFunction};
use crate::records::{Payload, RawRecord, SourceKind, Window};

pub use catalog::{EntityKind, ExtractorId, DEFAULT_TOP_N};

/// An entity that pulls a metric down, for drill-down listings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Offender {
    pub entity: String,
    pub base_value: f64,
    pub utility: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub metric_id: String,
    pub value: Option<f64>,
    pub n_entities: usize,
    pub raw_summary: BTreeMap<String, f64>,
    pub offenders: Vec<Offender>,
}

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("metric {metric} is missing param {param}")]
    MissingParam { metric: String, param: String },
    #[error("metric {metric} has invalid param {param}: {reason}")]
    InvalidParam {
        metric: String,
        param: String,
        reason: String,
    },
    #[error("metric {metric} expects {expected} records, got {found}")]
    KindMismatch {
        metric: String,
        expected: SourceKind,
        found: SourceKind,
    },
}

/// Everything an extractor needs from the metric definition.
pub(crate) struct Ctx<'a> {
    pub metric_id: &'a str,
    pub utility: &'a UtilityFunction,
    pub params: &'a BTreeMap<String, ParamValue>,
    pub top_n: usize,
    pub window: &'a Window,
}

impl Ctx<'_> {
    pub fn list(&self, key: &str) -> Result<&[String], MetricError> {
        match self.params.get(key) {
            None => Err(MetricError::MissingParam {
                metric: self.metric_id.into(),
                param: key.into(),
            }),
            Some(v) => v.as_list().ok_or_else(|| MetricError::InvalidParam {
                metric: self.metric_id.into(),
                param: key.into(),
                reason: "expected a list".into(),
            }),
        }
    }
}

/// Computes one assessed metric over `records`.
///
/// Records outside `window` are ignored; records of another source kind are
/// an error. For issues only the latest version of each issue id is kept.
pub fn compute_assessed_metric<'a>(
    def: &MetricDef,
    records: impl IntoIterator<Item = &'a RawRecord>,
    window: &Window,
) -> Result<MetricValue, MetricError> {
    let expected = def.extractor.source_kind();
    let mut in_window = Vec::new();
    for r in records {
        if r.kind() != expected {
            return Err(MetricError::KindMismatch {
                metric: def.id.clone(),
                expected,
                found: r.kind(),
            });
        }
        if window.contains(r.timestamp) {
            in_window.push(r);
        }
    }
    for key in def.extractor.required_params() {
        if !def.params.contains_key(&key) {
            return Err(MetricError::MissingParam {
                metric: def.id.clone(),
                param: key,
            });
        }
    }
    let top_n = match def.params.get("top_n") {
        None => DEFAULT_TOP_N,
        Some(v) => v
            .as_number()
            .filter(|n| *n >= 0.0)
            .map(|n| n as usize)
            .ok_or_else(|| MetricError::InvalidParam {
                metric: def.id.clone(),
                param: "top_n".into(),
                reason: "expected a non-negative number".into(),
            })?,
    };
    let ctx = Ctx {
        metric_id: &def.id,
        utility: &def.utility,
        params: &def.params,
        top_n,
        window,
    };
    extractors::run(def.extractor, &ctx, &in_window)
}

fn adhoc_def(extractor: ExtractorId, params: BTreeMap<String, ParamValue>) -> MetricDef {
    let mut all = extractor.default_params();
    all.extend(params);
    MetricDef {
        id: extractor.as_str().into(),
        name: extractor.as_str().into(),
        description: String::new(),
        extractor,
        source_kind: extractor.source_kind(),
        utility: extractor.default_utility(&all),
        params: all,
        thresholds: Default::default(),
        window_days: 1,
    }
}

/// Non-bug density with the default identity utility: `1 − openBugs/total`
/// over the latest version of each issue. `open_statuses` selects which
/// statuses count as open.
pub fn compute_non_bug_density<'a>(
    issues: impl IntoIterator<Item = &'a RawRecord>,
    window: &Window,
    open_statuses: &[&str],
) -> Result<MetricValue, MetricError> {
    let params = BTreeMap::from([(
        "open_statuses".to_string(),
        ParamValue::List(open_statuses.iter().map(|s| s.to_string()).collect()),
    )]);
    let def = adhoc_def(ExtractorId::NonBugDensity, params);
    compute_assessed_metric(&def, issues, window)
}

/// Share of touched paths changed by fewer than `change_limit` distinct commits.
pub fn compute_highly_changed<'a>(
    commits: impl IntoIterator<Item = &'a RawRecord>,
    window: &Window,
    change_limit: f64,
) -> Result<MetricValue, MetricError> {
    let params = BTreeMap::from([("change_limit".to_string(), ParamValue::Number(change_limit))]);
    let def = adhoc_def(ExtractorId::HighlyChangedFiles, params);
    compute_assessed_metric(&def, commits, window)
}

/// Uptime scored linearly between `floor_pct` (0) and `goal_pct` (1).
pub fn compute_availability<'a>(
    samples: impl IntoIterator<Item = &'a RawRecord>,
    window: &Window,
    floor_pct: f64,
    goal_pct: f64,
) -> Result<MetricValue, MetricError> {
    let params = BTreeMap::from([
        ("floor_pct".to_string(), ParamValue::Number(floor_pct)),
        ("goal_pct".to_string(), ParamValue::Number(goal_pct)),
    ]);
    let def = adhoc_def(ExtractorId::AvailabilityUptime, params);
    compute_assessed_metric(&def, samples, window)
}

/// Keeps only records whose payload is an issue, latest `updated` per issue id.
pub(crate) fn latest_issue_versions<'a>(
    records: &[&'a RawRecord],
) -> Vec<(&'a RawRecord, &'a crate::records::Issue)> {
    let mut latest: BTreeMap<&str, (&RawRecord, &crate::records::Issue)> = BTreeMap::new();
    for r in records {
        if let Payload::Issue(issue) = &r.payload {
            let newer = match latest.get(issue.issue_id.as_str()) {
                None => true,
                Some((prev_r, prev)) => {
                    (issue.updated, &r.record_id) > (prev.updated, &prev_r.record_id)
                }
            };
            if newer {
                latest.insert(issue.issue_id.as_str(), (r, issue));
            }
        }
    }
    latest.into_values().collect()
}
