//! Quality alerts and drill-down trees.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::Offender;
use crate::model::{Color, QualityModel, Stratum};
use crate::records::derive_record_id;
use crate::snapshot::Snapshot;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdCrossed {
    Warning,
    Critical,
}

/// A traffic light that got worse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Alert {
    pub alert_id: String,
    pub element_id: String,
    pub stratum: Stratum,
    /// `None` for alerts raised on the first assessment.
    pub previous_color: Option<Color>,
    pub new_color: Color,
    pub value: f64,
    pub threshold_crossed: ThresholdCrossed,
    pub snapshot_id: String,
    pub evaluated_at: DateTime<Utc>,
    #[serde(default)]
    pub acknowledged: bool,
}

impl Alert {
    pub fn transition(&self) -> String {
        match self.previous_color {
            Some(prev) => format!("{prev}→{}", self.new_color),
            None => format!("→{}", self.new_color),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum AlertError {
    #[error("snapshots disagree on elements: {0}")]
    ElementSetMismatch(String),
    #[error("unknown element {0}")]
    UnknownElement(String),
}

fn make_alert(
    curr: &Snapshot,
    id: &str,
    stratum: Stratum,
    prev: Option<Color>,
    color: Color,
    value: f64,
) -> Alert {
    Alert {
        alert_id: derive_record_id("alert", &[id, &curr.snapshot_id]),
        element_id: id.to_string(),
        stratum,
        previous_color: prev,
        new_color: color,
        value,
        threshold_crossed: if color == Color::Red {
            ThresholdCrossed::Critical
        } else {
            ThresholdCrossed::Warning
        },
        snapshot_id: curr.snapshot_id.clone(),
        evaluated_at: curr.evaluated_at,
        acknowledged: false,
    }
}

/// Alerts for every element of `curr` whose color strictly worsened since
/// `prev`. Without a previous snapshot every orange or red element alerts.
/// Transitions from or to no-data never alert.
///
/// Alert ids depend only on the element and the current snapshot, so running
/// this twice over the same pair yields the same alerts.
pub fn detect_alerts(
    prev: Option<&Snapshot>,
    curr: &Snapshot,
    model: &QualityModel,
) -> Result<Vec<Alert>, AlertError> {
    let ids: Vec<&str> = model.element_ids().map(|(id, _)| id).collect();
    for snap in std::iter::once(curr).chain(prev) {
        let missing: Vec<&str> = ids
            .iter()
            .copied()
            .filter(|id| !snap.entries.contains_key(*id))
            .collect();
        let extra: Vec<&str> = snap
            .entries
            .keys()
            .map(String::as_str)
            .filter(|id| model.stratum_of(id).is_none())
            .collect();
        if !missing.is_empty() || !extra.is_empty() {
            return Err(AlertError::ElementSetMismatch(format!(
                "snapshot {} missing [{}], extra [{}]",
                snap.snapshot_id,
                missing.join(", "),
                extra.join(", ")
            )));
        }
    }

    let mut out = Vec::new();
    for (id, entry) in &curr.entries {
        let Some(value) = entry.value else { continue };
        let prev_color = prev.map(|p| p.entries[id].color);
        let fire = match prev_color {
            None => matches!(entry.color, Color::Orange | Color::Red),
            Some(Color::NoData) => false,
            Some(pc) => entry.color.is_worse_than(pc),
        };
        if fire {
            out.push(make_alert(curr, id, entry.stratum, prev_color, entry.color, value));
        }
    }
    // aspects first, then factors, then metrics
    out.sort_by(|a, b| {
        (std::cmp::Reverse(a.stratum), &a.element_id)
            .cmp(&(std::cmp::Reverse(b.stratum), &b.element_id))
    });
    Ok(out)
}

/// One node of a drill-down tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrilldownNode {
    pub element_id: String,
    pub name: String,
    pub stratum: Stratum,
    pub value: Option<f64>,
    pub color: Color,
    /// Edge weight from the parent; `None` at the root.
    pub weight_from_parent: Option<f64>,
    /// `weight_from_parent · value`, when both exist.
    pub contribution: Option<f64>,
    /// Weight after dropping no-data siblings, so that a parent's value is
    /// the sum of its children's `renormalized_weight · value`.
    pub renormalized_weight: Option<f64>,
    pub children: Vec<DrilldownNode>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub offenders: Vec<Offender>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub raw_summary: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_entities: Option<usize>,
}

/// Worst first: ascending value, no-data last, ties by id.
fn worst_first(a: &DrilldownNode, b: &DrilldownNode) -> Ordering {
    match (a.value, b.value) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    }
    .then_with(|| a.element_id.cmp(&b.element_id))
}

/// Full subtree of `element_id` down to the metric leaves.
pub fn drilldown(
    snapshot: &Snapshot,
    element_id: &str,
    model: &QualityModel,
) -> Result<DrilldownNode, AlertError> {
    if model.stratum_of(element_id).is_none() || !snapshot.entries.contains_key(element_id) {
        return Err(AlertError::UnknownElement(element_id.to_string()));
    }
    Ok(build(snapshot, element_id, model, None))
}

fn build(snapshot: &Snapshot, id: &str, model: &QualityModel, weight: Option<f64>) -> DrilldownNode {
    let entry = snapshot.entries.get(id);
    let stratum = model.stratum_of(id).expect("element of the model");
    let value = entry.and_then(|e| e.value);
    let mut children: Vec<DrilldownNode> = model
        .children_of(id)
        .map(|e| build(snapshot, &e.child, model, Some(e.weight)))
        .collect();
    let data_weight: f64 = children
        .iter()
        .filter(|c| c.value.is_some())
        .filter_map(|c| c.weight_from_parent)
        .sum();
    for c in &mut children {
        if c.value.is_some() && data_weight > 0.0 {
            c.renormalized_weight = c.weight_from_parent.map(|w| w / data_weight);
        }
    }
    children.sort_by(worst_first);
    let (offenders, raw_summary, n_entities) = match (stratum, entry) {
        (Stratum::Metric, Some(e)) => (e.offenders.clone(), e.raw_summary.clone(), Some(e.n_entities)),
        _ => (Vec::new(), BTreeMap::new(), None),
    };
    DrilldownNode {
        element_id: id.to_string(),
        name: model.name_of(id).unwrap_or(id).to_string(),
        stratum,
        value,
        color: entry.map_or(Color::NoData, |e| e.color),
        weight_from_parent: weight,
        contribution: weight.zip(value).map(|(w, v)| w * v),
        renormalized_weight: None,
        children,
        offenders,
        raw_summary,
        n_entities,
    }
}
