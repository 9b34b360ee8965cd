use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::metrics::Offender;
use crate::model::{Color, Stratum};
use crate::records::Window;

/// Assessed state of one model element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub stratum: Stratum,
    pub value: Option<f64>,
    pub color: Color,
    #[serde(default)]
    pub n_entities: usize,
    /// Actual (un-normalized) values and counts behind `value`.
    #[serde(default)]
    pub raw_summary: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub offenders: Vec<Offender>,
}

/// One evaluation of the whole model over a window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub snapshot_id: String,
    pub evaluated_at: DateTime<Utc>,
    pub window: Window,
    /// Set on what-if results, which are never persisted.
    #[serde(default)]
    pub transient: bool,
    pub entries: BTreeMap<String, SnapshotEntry>,
}

impl Snapshot {
    pub fn value(&self, element: &str) -> Option<f64> {
        self.entries.get(element).and_then(|e| e.value)
    }

    pub fn color(&self, element: &str) -> Option<Color> {
        self.entries.get(element).map(|e| e.color)
    }

    /// Entries of one stratum, by element id.
    pub fn stratum(&self, stratum: Stratum) -> impl Iterator<Item = (&String, &SnapshotEntry)> {
        self.entries.iter().filter(move |(_, e)| e.stratum == stratum)
    }

    /// Broken internal invariants (value present iff color is not no-data).
    pub fn problems(&self) -> Vec<String> {
        self.entries
            .iter()
            .filter(|(_, e)| e.value.is_some() == (e.color == Color::NoData))
            .map(|(id, e)| format!("entry {id}: value {:?} with color {}", e.value, e.color))
            .collect()
    }
}

/// A point of an element's history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub snapshot_id: String,
    pub evaluated_at: DateTime<Utc>,
    pub value: Option<f64>,
    pub color: Color,
}
