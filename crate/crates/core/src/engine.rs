//! The model, the store and the single-flight guard behind one handle,
//! shared by the CLI and the HTTP service.

use std::path::Path;
use std::sync::{Arc, RwLock, RwLockReadGuard, RwLockWriteGuard};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alerts::{detect_alerts, drilldown, Alert, AlertError, DrilldownNode};
use crate::assessment::{
    evaluate, what_if, AssessmentError, AssessmentRequest, Trigger, WhatIfDelta,
};
use crate::ingest::{self, Format, IngestContext, IngestError};
use crate::model::{parse_model, validate_model, ModelError, QualityModel, Violation};
use crate::records::Window;
use crate::schedule::{schedule_assessments, ScheduleError, ScheduleHandle, SingleFlight, Ticker};
use crate::snapshot::{SeriesPoint, Snapshot};
use crate::store::{Store, StoreError};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid model: {} violation(s)", .0.len())]
    InvalidModel(Vec<Violation>),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Assessment(AssessmentError),
    #[error(transparent)]
    Alert(#[from] AlertError),
    #[error("an assessment is already running")]
    Busy,
    #[error("no assessment has been stored yet")]
    NoSnapshot,
    #[error("unknown element {0}")]
    UnknownElement(String),
}

impl From<AssessmentError> for EngineError {
    fn from(e: AssessmentError) -> Self {
        match e {
            AssessmentError::InvalidModel(v) => EngineError::InvalidModel(v),
            AssessmentError::Store(s) => EngineError::Store(s),
            other => EngineError::Assessment(other),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestReport {
    pub inserted: usize,
    pub duplicates: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentOutcome {
    pub snapshot: Snapshot,
    pub alerts: Vec<Alert>,
}

/// Reads and parses a model file; violations are not checked here.
pub fn load_model(path: impl AsRef<Path>) -> Result<QualityModel, EngineError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| EngineError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(parse_model(&text)?)
}

pub struct Engine {
    model: RwLock<Arc<QualityModel>>,
    store: RwLock<Store>,
    flight: Arc<SingleFlight>,
    project: String,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine").field("project", &self.project).finish()
    }
}

impl Engine {
    /// Wraps a validated model and an open store.
    pub fn new(model: QualityModel, store: Store, project: impl Into<String>) -> Result<Engine, EngineError> {
        let violations = validate_model(&model);
        if !violations.is_empty() {
            return Err(EngineError::InvalidModel(violations));
        }
        Ok(Engine {
            model: RwLock::new(Arc::new(model)),
            store: RwLock::new(store),
            flight: Arc::new(SingleFlight::new()),
            project: project.into(),
        })
    }

    /// Loads the model file and opens the store for writing.
    pub fn open(model_path: impl AsRef<Path>, store_dir: impl AsRef<Path>, project: &str) -> Result<Engine, EngineError> {
        let model = load_model(model_path)?;
        let violations = validate_model(&model);
        if !violations.is_empty() {
            return Err(EngineError::InvalidModel(violations));
        }
        let store = Store::open(store_dir, project)?;
        Engine::new(model, store, project)
    }

    pub fn project(&self) -> &str {
        &self.project
    }

    pub fn model(&self) -> Arc<QualityModel> {
        self.model.read().expect("model lock poisoned").clone()
    }

    /// Swaps in a new model if it is valid. Readers see either the old or
    /// the new model.
    pub fn replace_model(&self, model: QualityModel) -> Result<(), EngineError> {
        let violations = validate_model(&model);
        if !violations.is_empty() {
            return Err(EngineError::InvalidModel(violations));
        }
        *self.model.write().expect("model lock poisoned") = Arc::new(model);
        Ok(())
    }

    pub fn store(&self) -> RwLockReadGuard<'_, Store> {
        self.store.read().expect("store lock poisoned")
    }

    fn store_mut(&self) -> RwLockWriteGuard<'_, Store> {
        self.store.write().expect("store lock poisoned")
    }

    pub fn flight(&self) -> Arc<SingleFlight> {
        self.flight.clone()
    }

    pub fn ingest_context(&self, now: DateTime<Utc>) -> IngestContext {
        IngestContext::new(self.project.clone(), now)
    }

    pub fn ingest(&self, format: Format, text: &str, ctx: &IngestContext) -> Result<IngestReport, EngineError> {
        let parsed = ingest::parse(format, text, ctx)?;
        let outcome = self.store_mut().append(parsed.records)?;
        Ok(IngestReport {
            inserted: outcome.inserted,
            duplicates: outcome.duplicates,
            warnings: parsed.warnings,
        })
    }

    /// Runs and persists one assessment, then records alerts against the
    /// previous snapshot. Fails with [`EngineError::Busy`] while another run
    /// is active.
    pub fn assess(&self, req: &AssessmentRequest) -> Result<AssessmentOutcome, EngineError> {
        let _guard = self.flight.try_acquire().ok_or(EngineError::Busy)?;
        self.assess_unguarded(req)
    }

    fn assess_unguarded(&self, req: &AssessmentRequest) -> Result<AssessmentOutcome, EngineError> {
        let model = self.model();
        let snapshot = evaluate(&model, &self.store(), req)?;
        let mut store = self.store_mut();
        let prev = store.latest_snapshot().cloned();
        store.save_snapshot(&snapshot)?;
        let alerts = match detect_alerts(prev.as_ref(), &snapshot, &model) {
            Ok(a) => a,
            Err(AlertError::ElementSetMismatch(why)) => {
                tracing::warn!(%why, "model changed since the previous snapshot; alerting as on a first run");
                detect_alerts(None, &snapshot, &model)?
            }
            Err(e) => return Err(e.into()),
        };
        store.append_alerts(&alerts)?;
        Ok(AssessmentOutcome { snapshot, alerts })
    }

    /// Evaluates under `delta` without persisting. Without an explicit
    /// window the latest snapshot's window is reused, so the result is
    /// comparable with the current assessment.
    pub fn what_if(&self, window: Option<Window>, delta: &WhatIfDelta, now: DateTime<Utc>) -> Result<Snapshot, EngineError> {
        let model = self.model();
        let store = self.store();
        let req = match window.or_else(|| store.latest_snapshot().map(|s| s.window)) {
            Some(w) => AssessmentRequest::explicit(w, now),
            None => AssessmentRequest::trailing(None, now),
        };
        Ok(what_if(&model, &store, &req, delta)?)
    }

    pub fn current(&self) -> Option<Snapshot> {
        self.store().latest_snapshot().cloned()
    }

    pub fn history(&self, element: &str, window: &Window) -> Result<Vec<SeriesPoint>, EngineError> {
        let series = self.store().element_series(element, window);
        if series.is_empty() && self.model().stratum_of(element).is_none() {
            return Err(EngineError::UnknownElement(element.to_string()));
        }
        Ok(series)
    }

    /// Drill-down of `element` in the latest snapshot.
    pub fn drilldown(&self, element: &str) -> Result<DrilldownNode, EngineError> {
        let model = self.model();
        if model.stratum_of(element).is_none() {
            return Err(EngineError::UnknownElement(element.to_string()));
        }
        let store = self.store();
        let snapshot = store.latest_snapshot().ok_or(EngineError::NoSnapshot)?;
        Ok(drilldown(snapshot, element, &model)?)
    }

    pub fn alerts(&self, since: Option<DateTime<Utc>>) -> Vec<Alert> {
        self.store().alerts(since)
    }

    pub fn acknowledge(&self, alert_id: &str, now: DateTime<Utc>) -> Result<Alert, EngineError> {
        Ok(self.store_mut().acknowledge(alert_id, now)?)
    }

    /// Assesses every `period` over trailing windows of `window_days` (each
    /// metric's own window when `None`).
    pub fn schedule<T>(self: &Arc<Self>, period: Duration, ticker: T, window_days: Option<u32>) -> Result<ScheduleHandle, ScheduleError>
    where
        T: Ticker + Clone + Sync + 'static,
    {
        let engine = self.clone();
        schedule_assessments(period, ticker, self.flight(), move |at| {
            let req = AssessmentRequest {
                trigger: Trigger::Scheduled,
                ..AssessmentRequest::trailing(window_days, at)
            };
            engine.assess_unguarded(&req).map(|o| {
                for a in &o.alerts {
                    tracing::warn!(element = %a.element_id, transition = %a.transition(), "quality alert");
                }
                o.snapshot.snapshot_id
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::MINI;
    use crate::schedule::SimulatedTicker;
    use chrono::TimeZone;

    fn engine(dir: &Path) -> Engine {
        let store = Store::open(dir, "p").unwrap();
        Engine::new(parse_model(MINI).unwrap(), store, "p").unwrap()
    }

    fn at(d: u32) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2018, 1, d, 0, 0, 0).unwrap()
    }

    const FILES: &str = r#"{"analysis_timestamp": "2018-01-10T00:00:00Z", "files": [
        {"path": "a.c", "loc": 10, "comment_lines": 2, "function_complexities": [3]},
        {"path": "b.c", "loc": 10, "comment_lines": 2, "function_complexities": [30],
         "violations": [{"rule": "r", "severity": "critical", "type": "bug"}]}
    ]}"#;

    #[test]
    fn ingest_assess_alert() {
        let dir = tempfile::tempdir().unwrap();
        let e = engine(dir.path());
        let ctx = e.ingest_context(at(1));
        let r = e.ingest(Format::Static, FILES, &ctx).unwrap();
        assert_eq!((r.inserted, r.duplicates), (2, 0));
        let r = e.ingest(Format::Static, FILES, &ctx).unwrap();
        assert_eq!((r.inserted, r.duplicates), (0, 2));

        let req = AssessmentRequest::explicit(Window::new(at(1), at(15)), at(15));
        let out = e.assess(&req).unwrap();
        assert_eq!(out.snapshot.value("maintainability"), Some(0.5));
        // first run: every non-green element alerts
        assert!(out.alerts.iter().any(|a| a.element_id == "maintainability"));
        let again = e.assess(&req).unwrap();
        assert!(again.alerts.is_empty());
        assert_eq!(e.alerts(None).len(), out.alerts.len());

        let id = out.alerts[0].alert_id.clone();
        assert!(e.acknowledge(&id, at(16)).unwrap().acknowledged);
        assert!(e.acknowledge("nope", at(16)).is_err());

        let tree = e.drilldown("maintainability").unwrap();
        assert_eq!(tree.children.len(), 2);
        assert!(matches!(e.drilldown("nope"), Err(EngineError::UnknownElement(_))));
        assert_eq!(e.history("maintainability", &Window::all_time()).unwrap().len(), 2);
    }

    #[test]
    fn busy_while_flight_held() {
        let dir = tempfile::tempdir().unwrap();
        let e = engine(dir.path());
        let flight = e.flight();
        let _g = flight.try_acquire().unwrap();
        let req = AssessmentRequest::trailing(None, at(15));
        assert!(matches!(e.assess(&req), Err(EngineError::Busy)));
    }

    #[test]
    fn model_swap_is_validated() {
        let dir = tempfile::tempdir().unwrap();
        let e = engine(dir.path());
        let mut bad = parse_model(MINI).unwrap();
        bad.edges[0].weight = 0.7;
        assert!(matches!(e.replace_model(bad), Err(EngineError::InvalidModel(_))));
        let mut good = parse_model(MINI).unwrap();
        good.edges[0].weight = 0.25;
        good.edges[1].weight = 0.75;
        e.replace_model(good.clone()).unwrap();
        assert_eq!(*e.model(), good);
    }

    #[test]
    fn what_if_reuses_latest_window() {
        let dir = tempfile::tempdir().unwrap();
        let e = engine(dir.path());
        e.ingest(Format::Static, FILES, &e.ingest_context(at(1))).unwrap();
        let req = AssessmentRequest::explicit(Window::new(at(1), at(15)), at(15));
        let persisted = e.assess(&req).unwrap().snapshot;
        let same = e.what_if(None, &WhatIfDelta::default(), at(20)).unwrap();
        assert_eq!(same.window, persisted.window);
        assert_eq!(same.entries, persisted.entries);
        assert!(same.transient);
        assert_eq!(e.current().unwrap(), persisted);
    }

    #[test]
    fn scheduled_runs_persist_snapshots() {
        let dir = tempfile::tempdir().unwrap();
        let e = Arc::new(engine(dir.path()));
        let ticker = SimulatedTicker::new(at(1), at(1) + Duration::hours(3));
        let stats = e.schedule(Duration::hours(1), ticker, Some(7)).unwrap().join();
        assert_eq!(stats.runs, 3);
        assert_eq!(e.store().snapshots().len(), 3);
        assert_eq!(e.current().unwrap().window, Window::trailing_days(at(1) + Duration::hours(3), 7));
    }
}
