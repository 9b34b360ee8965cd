//! The quality model: aspects, factors and metrics joined by weighted edges.

mod traffic;
mod utility;
mod validate;

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::catalog::ExtractorId;
use crate::records::SourceKind;

pub use traffic::{classify_color, Color, Thresholds, DEFAULT_CRITICAL, DEFAULT_WARNING};
pub use utility::UtilityFunction;
pub use validate::{validate_model, Violation, WEIGHT_TOLERANCE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stratum {
    Metric,
    Factor,
    Aspect,
}

impl Stratum {
    pub fn as_str(self) -> &'static str {
        match self {
            Stratum::Metric => "metric",
            Stratum::Factor => "factor",
            Stratum::Aspect => "aspect",
        }
    }

    /// The stratum directly below, if any.
    pub fn child(self) -> Option<Stratum> {
        match self {
            Stratum::Aspect => Some(Stratum::Factor),
            Stratum::Factor => Some(Stratum::Metric),
            Stratum::Metric => None,
        }
    }
}

impl fmt::Display for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Metric parameter: a number (threshold, limit) or a list of names.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    List(Vec<String>),
}

impl ParamValue {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            ParamValue::Number(n) => Some(*n),
            ParamValue::List(_) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[String]> {
        match self {
            ParamValue::List(l) => Some(l),
            ParamValue::Number(_) => None,
        }
    }
}

/// An aspect or a factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementDef {
    pub id: String,
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    #[serde(default)]
    pub thresholds: Thresholds,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricDef {
    pub id: String,
    pub name: String,
    pub description: String,
    pub extractor: ExtractorId,
    pub source_kind: SourceKind,
    pub utility: UtilityFunction,
    pub params: BTreeMap<String, ParamValue>,
    pub thresholds: Thresholds,
    pub window_days: u32,
}

impl MetricDef {
    pub fn number_param(&self, key: &str) -> Option<f64> {
        self.params.get(key).and_then(ParamValue::as_number)
    }

    pub fn list_param(&self, key: &str) -> Option<&[String]> {
        self.params.get(key).and_then(ParamValue::as_list)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub parent: String,
    pub child: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QualityModel {
    pub default_window_days: u32,
    pub aspects: Vec<ElementDef>,
    pub factors: Vec<ElementDef>,
    pub metrics: Vec<MetricDef>,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown extractor `{extractor}` in metric `{metric}`")]
    UnknownExtractor { metric: String, extractor: String },
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
}

// Input shape: everything the catalog can default is optional.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    default_window_days: u32,
    aspects: Vec<ElementDef>,
    factors: Vec<ElementDef>,
    metrics: Vec<MetricDoc>,
    edges: Vec<Edge>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MetricDoc {
    id: String,
    name: String,
    #[serde(default)]
    description: String,
    extractor: String,
    #[serde(default)]
    source_kind: Option<SourceKind>,
    #[serde(default)]
    utility: Option<UtilityFunction>,
    #[serde(default)]
    params: BTreeMap<String, ParamValue>,
    #[serde(default)]
    thresholds: Option<Thresholds>,
    #[serde(default)]
    window_days: Option<u32>,
}

/// Parses a model document. Omitted thresholds default to (0.67, 0.33),
/// omitted params and utilities to the extractor catalog, omitted windows to
/// `default_window_days`. Structural rules (weights, strata) are left to
/// [`validate_model`].
pub fn parse_model(document: &str) -> Result<QualityModel, ModelError> {
    let doc: ModelDoc = serde_json::from_str(document).map_err(|e| ModelError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    let mut metrics = Vec::with_capacity(doc.metrics.len());
    for m in doc.metrics {
        let extractor: ExtractorId =
            m.extractor
                .parse()
                .map_err(|_| ModelError::UnknownExtractor {
                    metric: m.id.clone(),
                    extractor: m.extractor.clone(),
                })?;
        let mut params = extractor.default_params();
        params.extend(m.params);
        let utility = m
            .utility
            .unwrap_or_else(|| extractor.default_utility(&params));
        metrics.push(MetricDef {
            id: m.id,
            name: m.name,
            description: m.description,
            extractor,
            source_kind: m.source_kind.unwrap_or(extractor.source_kind()),
            utility,
            params,
            thresholds: m.thresholds.unwrap_or_default(),
            window_days: m.window_days.unwrap_or(doc.default_window_days),
        });
    }

    let model = QualityModel {
        default_window_days: doc.default_window_days,
        aspects: doc.aspects,
        factors: doc.factors,
        metrics,
        edges: doc.edges,
    };
    if let Some(dup) = model.duplicate_ids().into_iter().next() {
        return Err(ModelError::DuplicateId(dup));
    }
    Ok(model)
}

impl QualityModel {
    /// Fully explicit document; `parse_model(&m.to_json())` reproduces `m`.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization is infallible")
    }

    pub fn element_ids(&self) -> impl Iterator<Item = (&str, Stratum)> {
        self.aspects
            .iter()
            .map(|a| (a.id.as_str(), Stratum::Aspect))
            .chain(self.factors.iter().map(|f| (f.id.as_str(), Stratum::Factor)))
            .chain(self.metrics.iter().map(|m| (m.id.as_str(), Stratum::Metric)))
    }

    pub(crate) fn duplicate_ids(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        let mut dups = Vec::new();
        for (id, _) in self.element_ids() {
            if !seen.insert(id) && !dups.iter().any(|d| d == id) {
                dups.push(id.to_string());
            }
        }
        dups
    }

    pub fn stratum_of(&self, id: &str) -> Option<Stratum> {
        self.element_ids().find(|(e, _)| *e == id).map(|(_, s)| s)
    }

    pub fn metric(&self, id: &str) -> Option<&MetricDef> {
        self.metrics.iter().find(|m| m.id == id)
    }

    pub fn metric_mut(&mut self, id: &str) -> Option<&mut MetricDef> {
        self.metrics.iter_mut().find(|m| m.id == id)
    }

    pub fn name_of(&self, id: &str) -> Option<&str> {
        self.aspects
            .iter()
            .chain(self.factors.iter())
            .find(|e| e.id == id)
            .map(|e| e.name.as_str())
            .or_else(|| self.metric(id).map(|m| m.name.as_str()))
    }

    pub fn thresholds_of(&self, id: &str) -> Option<Thresholds> {
        self.aspects
            .iter()
            .chain(self.factors.iter())
            .find(|e| e.id == id)
            .map(|e| e.thresholds)
            .or_else(|| self.metric(id).map(|m| m.thresholds))
    }

    pub fn set_thresholds(&mut self, id: &str, t: Thresholds) -> bool {
        if let Some(e) = self
            .aspects
            .iter_mut()
            .chain(self.factors.iter_mut())
            .find(|e| e.id == id)
        {
            e.thresholds = t;
            return true;
        }
        if let Some(m) = self.metric_mut(id) {
            m.thresholds = t;
            return true;
        }
        false
    }

    /// Edges whose parent is `id`, in declaration order.
    pub fn children_of<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edges.iter().filter(move |e| e.parent == id)
    }

    pub fn parents_of<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a Edge> + 'a {
        self.edges.iter().filter(move |e| e.child == id)
    }
}
