//! Embedded append-only persistence.
//!
//! Layout of a store directory:
//!
//! ```text
//! manifest.json    format version and project id
//! raw.jsonl        raw records
//! metrics.jsonl    snapshot entries of the metric stratum
//! factors.jsonl    snapshot entries of the factor stratum
//! aspects.jsonl    snapshot entries of the aspect stratum
//! alerts.jsonl     raised alerts and acknowledgements
//! ```
//!
//! Lines are only ever appended. A writer holds an exclusive lock on
//! `.lock`; read-only handles take no lock.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alerts::Alert;
use crate::model::Stratum;
use crate::records::{RawRecord, SourceKind, Window};
use crate::snapshot::{SeriesPoint, Snapshot, SnapshotEntry};

pub const FORMAT_VERSION: u32 = 1;

const MANIFEST: &str = "manifest.json";
const RAW: &str = "raw.jsonl";
const METRICS: &str = "metrics.jsonl";
const FACTORS: &str = "factors.jsonl";
const ASPECTS: &str = "aspects.jsonl";
const ALERTS: &str = "alerts.jsonl";
const LOCK: &str = ".lock";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("corrupt line {line} in {path}: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("store at {0} is locked by another writer")]
    Locked(PathBuf),
    #[error("store at {0} was opened read-only")]
    ReadOnly(PathBuf),
    #[error("unsupported store format version {0}")]
    Version(u32),
    #[error("invalid record {record_id}: {message}")]
    InvalidRecord { record_id: String, message: String },
    #[error("invalid snapshot {snapshot_id}: {message}")]
    InvalidSnapshot {
        snapshot_id: String,
        message: String,
    },
    #[error("unknown alert {0}")]
    UnknownAlert(String),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub project: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AppendOutcome {
    pub inserted: usize,
    pub duplicates: usize,
}

#[derive(Serialize, Deserialize)]
struct SnapshotLine {
    snapshot_id: String,
    evaluated_at: DateTime<Utc>,
    window: Window,
    element_id: String,
    #[serde(flatten)]
    entry: SnapshotEntry,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum AlertEvent {
    Raised(Alert),
    Ack {
        alert_id: String,
        at: DateTime<Utc>,
    },
}

pub struct Store {
    dir: PathBuf,
    manifest: Manifest,
    raw: BTreeMap<SourceKind, BTreeMap<(DateTime<Utc>, String), RawRecord>>,
    raw_ids: HashSet<String>,
    snapshots: Vec<Snapshot>,
    alerts: Vec<Alert>,
    alert_index: HashMap<String, usize>,
    // held for its lock; None for read-only handles
    lock: Option<File>,
}

impl std::fmt::Debug for Store {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Store")
            .field("dir", &self.dir)
            .field("raw_records", &self.raw_ids.len())
            .field("snapshots", &self.snapshots.len())
            .field("alerts", &self.alerts.len())
            .field("writable", &self.lock.is_some())
            .finish()
    }
}

/// Snapshot lines gathered while reading: id, evaluation time, window, entries.
type PartialSnapshot = (String, DateTime<Utc>, Window, BTreeMap<String, SnapshotEntry>);

impl Store {
    /// Opens (creating if needed) a store for writing. Fails with
    /// [`StoreError::Locked`] while another writer holds the directory.
    pub fn open(dir: impl AsRef<Path>, project: &str) -> Result<Store, StoreError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let lock_path = dir.join(LOCK);
        let lock = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&lock_path)
            .map_err(io_err(&lock_path))?;
        match lock.try_lock() {
            Ok(()) => {}
            Err(fs::TryLockError::WouldBlock) => return Err(StoreError::Locked(dir)),
            Err(fs::TryLockError::Error(e)) => return Err(io_err(&lock_path)(e)),
        }

        let manifest_path = dir.join(MANIFEST);
        if !manifest_path.exists() {
            let manifest = Manifest {
                format_version: FORMAT_VERSION,
                project: project.to_string(),
            };
            let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
            fs::write(&manifest_path, text + "\n").map_err(io_err(&manifest_path))?;
        }
        for name in [RAW, METRICS, FACTORS, ASPECTS, ALERTS] {
            repair_torn_tail(&dir.join(name))?;
        }
        let mut store = Store::load(dir)?;
        store.lock = Some(lock);
        Ok(store)
    }

    /// Opens an existing store without taking the writer lock. A missing
    /// directory reads as an empty store.
    pub fn open_read_only(dir: impl AsRef<Path>) -> Result<Store, StoreError> {
        Store::load(dir.as_ref().to_path_buf())
    }

    fn load(dir: PathBuf) -> Result<Store, StoreError> {
        let manifest_path = dir.join(MANIFEST);
        let manifest = if manifest_path.exists() {
            let text = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
            let m: Manifest = serde_json::from_str(&text).map_err(|e| StoreError::Corrupt {
                path: manifest_path.clone(),
                line: e.line(),
                message: e.to_string(),
            })?;
            if m.format_version != FORMAT_VERSION {
                return Err(StoreError::Version(m.format_version));
            }
            m
        } else {
            Manifest {
                format_version: FORMAT_VERSION,
                project: String::new(),
            }
        };

        let mut store = Store {
            dir,
            manifest,
            raw: BTreeMap::new(),
            raw_ids: HashSet::new(),
            snapshots: Vec::new(),
            alerts: Vec::new(),
            alert_index: HashMap::new(),
            lock: None,
        };

        for rec in read_lines::<RawRecord>(&store.dir.join(RAW))? {
            store.index_raw(rec);
        }

        // Aspect lines are written last, so a snapshot counts as committed
        // once they are present.
        let mut partial: Vec<PartialSnapshot> = Vec::new();
        let mut pos: HashMap<String, usize> = HashMap::new();
        let mut committed = HashSet::new();
        for name in [METRICS, FACTORS, ASPECTS] {
            for line in read_lines::<SnapshotLine>(&store.dir.join(name))? {
                if name == ASPECTS {
                    committed.insert(line.snapshot_id.clone());
                }
                let idx = *pos.entry(line.snapshot_id.clone()).or_insert_with(|| {
                    partial.push((
                        line.snapshot_id.clone(),
                        line.evaluated_at,
                        line.window,
                        BTreeMap::new(),
                    ));
                    partial.len() - 1
                });
                partial[idx].3.insert(line.element_id, line.entry);
            }
        }
        store.snapshots = partial
            .into_iter()
            .filter(|(id, ..)| committed.contains(id))
            .map(|(snapshot_id, evaluated_at, window, entries)| Snapshot {
                snapshot_id,
                evaluated_at,
                window,
                transient: false,
                entries,
            })
            .collect();
        store.snapshots.sort_by_key(|s| s.evaluated_at);

        for event in read_lines::<AlertEvent>(&store.dir.join(ALERTS))? {
            store.apply_alert_event(event);
        }
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    pub fn is_writable(&self) -> bool {
        self.lock.is_some()
    }

    fn ensure_writable(&self) -> Result<(), StoreError> {
        if self.lock.is_none() {
            return Err(StoreError::ReadOnly(self.dir.clone()));
        }
        Ok(())
    }

    fn index_raw(&mut self, rec: RawRecord) -> bool {
        if !self.raw_ids.insert(rec.record_id.clone()) {
            return false;
        }
        self.raw
            .entry(rec.kind())
            .or_default()
            .insert((rec.timestamp, rec.record_id.clone()), rec);
        true
    }

    /// Appends records whose id has not been seen; the rest are counted as
    /// duplicates. The batch is written with a single write, so it is either
    /// fully visible or not at all.
    pub fn append(&mut self, records: Vec<RawRecord>) -> Result<AppendOutcome, StoreError> {
        self.ensure_writable()?;
        for r in &records {
            if let Some(problem) = r.problems().into_iter().next() {
                return Err(StoreError::InvalidRecord {
                    record_id: r.record_id.clone(),
                    message: problem,
                });
            }
        }
        let mut fresh = Vec::new();
        let mut batch_ids = HashSet::new();
        let mut duplicates = 0;
        for r in records {
            if self.raw_ids.contains(&r.record_id) || !batch_ids.insert(r.record_id.clone()) {
                duplicates += 1;
            } else {
                fresh.push(r);
            }
        }
        if !fresh.is_empty() {
            let mut buf = String::new();
            for r in &fresh {
                buf.push_str(&serde_json::to_string(r).expect("record serializes"));
                buf.push('\n');
            }
            append_bytes(&self.dir.join(RAW), buf.as_bytes())?;
        }
        let inserted = fresh.len();
        for r in fresh {
            self.index_raw(r);
        }
        Ok(AppendOutcome {
            inserted,
            duplicates,
        })
    }

    /// Records of `kind` with `from <= timestamp < to`, in timestamp order.
    pub fn query_raw(&self, kind: SourceKind, window: &Window) -> Vec<RawRecord> {
        self.raw_iter(kind, window).cloned().collect()
    }

    pub fn raw_iter<'a>(
        &'a self,
        kind: SourceKind,
        window: &Window,
    ) -> impl Iterator<Item = &'a RawRecord> + 'a {
        let (from, to) = (window.from, window.to);
        self.raw
            .get(&kind)
            .into_iter()
            .flat_map(move |m| {
                m.range((from, String::new())..)
                    .take_while(move |((t, _), _)| *t < to)
                    .map(|(_, r)| r)
            })
    }

    pub fn raw_count(&self) -> usize {
        self.raw_ids.len()
    }

    pub fn raw_count_by_kind(&self) -> BTreeMap<SourceKind, usize> {
        self.raw.iter().map(|(k, m)| (*k, m.len())).collect()
    }

    /// Persists a snapshot, one line per entry in the file of its stratum.
    pub fn save_snapshot(&mut self, snapshot: &Snapshot) -> Result<String, StoreError> {
        self.ensure_writable()?;
        let invalid = |message: String| StoreError::InvalidSnapshot {
            snapshot_id: snapshot.snapshot_id.clone(),
            message,
        };
        if snapshot.transient {
            return Err(invalid("transient snapshots are not persisted".into()));
        }
        if self.snapshots.iter().any(|s| s.snapshot_id == snapshot.snapshot_id) {
            return Err(invalid("snapshot id already stored".into()));
        }
        if let Some(p) = snapshot.problems().into_iter().next() {
            return Err(invalid(p));
        }
        if snapshot.stratum(Stratum::Aspect).next().is_none() {
            return Err(invalid("snapshot has no aspect entries".into()));
        }
        for (name, stratum) in [
            (METRICS, Stratum::Metric),
            (FACTORS, Stratum::Factor),
            (ASPECTS, Stratum::Aspect),
        ] {
            let mut buf = String::new();
            for (id, entry) in snapshot.stratum(stratum) {
                let line = SnapshotLine {
                    snapshot_id: snapshot.snapshot_id.clone(),
                    evaluated_at: snapshot.evaluated_at,
                    window: snapshot.window,
                    element_id: id.clone(),
                    entry: entry.clone(),
                };
                buf.push_str(&serde_json::to_string(&line).expect("snapshot line serializes"));
                buf.push('\n');
            }
            if !buf.is_empty() {
                append_bytes(&self.dir.join(name), buf.as_bytes())?;
            }
        }
        let at = self
            .snapshots
            .partition_point(|s| s.evaluated_at <= snapshot.evaluated_at);
        self.snapshots.insert(at, snapshot.clone());
        Ok(snapshot.snapshot_id.clone())
    }

    /// Snapshots evaluated within `window`, oldest first.
    pub fn query_snapshots(&self, window: &Window) -> Vec<Snapshot> {
        self.snapshots
            .iter()
            .filter(|s| window.contains(s.evaluated_at))
            .cloned()
            .collect()
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn latest_snapshot(&self) -> Option<&Snapshot> {
        self.snapshots.last()
    }

    pub fn snapshot(&self, id: &str) -> Option<&Snapshot> {
        self.snapshots.iter().find(|s| s.snapshot_id == id)
    }

    /// History of one element over the snapshots evaluated within `window`.
    pub fn element_series(&self, element: &str, window: &Window) -> Vec<SeriesPoint> {
        self.snapshots
            .iter()
            .filter(|s| window.contains(s.evaluated_at))
            .filter_map(|s| {
                s.entries.get(element).map(|e| SeriesPoint {
                    snapshot_id: s.snapshot_id.clone(),
                    evaluated_at: s.evaluated_at,
                    value: e.value,
                    color: e.color,
                })
            })
            .collect()
    }

    fn apply_alert_event(&mut self, event: AlertEvent) -> bool {
        match event {
            AlertEvent::Raised(alert) => {
                if self.alert_index.contains_key(&alert.alert_id) {
                    return false;
                }
                self.alert_index
                    .insert(alert.alert_id.clone(), self.alerts.len());
                self.alerts.push(alert);
                true
            }
            AlertEvent::Ack { alert_id, .. } => match self.alert_index.get(&alert_id) {
                Some(&i) => {
                    self.alerts[i].acknowledged = true;
                    true
                }
                None => false,
            },
        }
    }

    /// Persists alerts not stored yet; returns how many were new.
    pub fn append_alerts(&mut self, alerts: &[Alert]) -> Result<usize, StoreError> {
        self.ensure_writable()?;
        let mut seen = HashSet::new();
        let fresh: Vec<&Alert> = alerts
            .iter()
            .filter(|a| {
                !self.alert_index.contains_key(&a.alert_id) && seen.insert(a.alert_id.as_str())
            })
            .collect();
        if fresh.is_empty() {
            return Ok(0);
        }
        let mut buf = String::new();
        for a in &fresh {
            let line = serde_json::to_string(&AlertEvent::Raised((*a).clone()))
                .expect("alert serializes");
            buf.push_str(&line);
            buf.push('\n');
        }
        append_bytes(&self.dir.join(ALERTS), buf.as_bytes())?;
        let n = fresh.len();
        for a in fresh.into_iter().cloned().collect::<Vec<_>>() {
            self.apply_alert_event(AlertEvent::Raised(a));
        }
        Ok(n)
    }

    /// Alerts raised at or after `since` (all when `None`), oldest first.
    pub fn alerts(&self, since: Option<DateTime<Utc>>) -> Vec<Alert> {
        self.alerts
            .iter()
            .filter(|a| since.is_none_or(|t| a.evaluated_at >= t))
            .cloned()
            .collect()
    }

    pub fn alert(&self, id: &str) -> Option<&Alert> {
        self.alert_index.get(id).map(|&i| &self.alerts[i])
    }

    /// Marks an alert acknowledged. Acknowledging twice is a no-op.
    pub fn acknowledge(&mut self, alert_id: &str, at: DateTime<Utc>) -> Result<Alert, StoreError> {
        self.ensure_writable()?;
        let Some(&i) = self.alert_index.get(alert_id) else {
            return Err(StoreError::UnknownAlert(alert_id.to_string()));
        };
        if !self.alerts[i].acknowledged {
            let line = serde_json::to_string(&AlertEvent::Ack {
                alert_id: alert_id.to_string(),
                at,
            })
            .expect("ack serializes");
            append_bytes(&self.dir.join(ALERTS), format!("{line}\n").as_bytes())?;
            self.alerts[i].acknowledged = true;
        }
        Ok(self.alerts[i].clone())
    }
}

fn append_bytes(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io_err(path))?;
    f.write_all(bytes).map_err(io_err(path))?;
    f.sync_data().map_err(io_err(path))
}

fn read_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, StoreError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    // an unterminated final line is an interrupted write and is not visible
    let complete = match text.rfind('\n') {
        Some(i) => &text[..=i],
        None => "",
    };
    complete
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| StoreError::Corrupt {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Drops an unterminated final line left by an interrupted write, so the next
/// append starts on a fresh line.
fn repair_torn_tail(path: &Path) -> Result<(), StoreError> {
    let mut f = match OpenOptions::new().read(true).write(true).open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(()),
        Err(e) => return Err(io_err(path)(e)),
    };
    let mut bytes = Vec::new();
    f.read_to_end(&mut bytes).map_err(io_err(path))?;
    if bytes.is_empty() || bytes.ends_with(b"\n") {
        return Ok(());
    }
    let keep = bytes.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
    f.set_len(keep as u64).map_err(io_err(path))?;
    f.seek(SeekFrom::End(0)).map_err(io_err(path))?;
    f.sync_data().map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Color;
    use crate::records::{AvailabilitySample, Issue, IssueStatus, IssueType, Payload};
    use chrono::{Duration, TimeZone};

    fn day(d: i64) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2018, 1, 1, 0, 0, 0).unwrap() + Duration::days(d)
    }

    fn issue(id: &str, d: i64) -> RawRecord {
        RawRecord::new(
            format!("issue-{id}"),
            "p",
            day(d),
            Payload::Issue(Issue {
                issue_id: id.into(),
                issue_type: IssueType::Bug,
                status: IssueStatus::Open,
                created: day(d),
                updated: day(d),
                resolved: None,
                iteration: None,
                release: None,
                due_date: None,
                assignee: None,
                estimate_hours: None,
                description: None,
            }),
        )
    }

    fn sample(i: i64) -> RawRecord {
        RawRecord::new(
            format!("avail-{i}"),
            "p",
            day(i),
            Payload::AvailabilitySample(AvailabilitySample { up: i % 2 == 0 }),
        )
    }

    #[test]
    fn append_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = Store::open(dir.path(), "p").unwrap();
        let batch: Vec<_> = (0..5).map(sample).collect();
        assert_eq!(
            store.append(batch.clone()).unwrap(),
            AppendOutcome { inserted: 5, duplicates: 0 }
        );
        assert_eq!(
            store.append(batch).unwrap(),
            AppendOutcome { inserted: 0, duplicates: 5 }
        );
        assert_eq!(store.append(vec![]).unwrap(), AppendOutcome::default());
        assert_eq!(store.raw_count(), 5);
    }

    #[test]
    fn windowed_query_is_half_open() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = Store::open(dir.path(), "p").unwrap();
        store
            .append(vec![issue("c", 20), issue("a", 1), issue("b", 5), sample(3)])
            .unwrap();
        let got = store.query_raw(SourceKind::Issue, &Window::new(day(0), day(10)));
        let ids: Vec<_> = got.iter().map(|r| r.record_id.as_str()).collect();
        assert_eq!(ids, ["issue-a", "issue-b"]);
        let boundary = store.query_raw(SourceKind::Issue, &Window::new(day(0), day(5)));
        assert_eq!(boundary.len(), 1);
        assert_eq!(store.query_raw(SourceKind::AvailabilitySample, &Window::all_time()).len(), 1);
        assert!(store.query_raw(SourceKind::Commit, &Window::all_time()).is_empty());
    }

    #[test]
    fn writer_lock_is_exclusive() {
        let dir = tempfile::tempdir().unwrap();
        let _store = Store::open(dir.path(), "p").unwrap();
        assert!(matches!(
            Store::open(dir.path(), "p"),
            Err(StoreError::Locked(_))
        ));
        let ro = Store::open_read_only(dir.path()).unwrap();
        assert!(!ro.is_writable());
    }

    #[test]
    fn read_only_rejects_writes() {
        let dir = tempfile::tempdir().unwrap();
        let mut ro = Store::open_read_only(dir.path()).unwrap();
        assert!(matches!(ro.append(vec![sample(1)]), Err(StoreError::ReadOnly(_))));
    }

    #[test]
    fn torn_tail_is_ignored_and_repaired() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut store = Store::open(dir.path(), "p").unwrap();
            store.append(vec![sample(1)]).unwrap();
        }
        let raw = dir.path().join(RAW);
        let mut f = OpenOptions::new().append(true).open(&raw).unwrap();
        f.write_all(b"{\"record_id\":\"half").unwrap();
        drop(f);
        assert_eq!(Store::open_read_only(dir.path()).unwrap().raw_count(), 1);
        let mut store = Store::open(dir.path(), "p").unwrap();
        store.append(vec![sample(2)]).unwrap();
        drop(store);
        assert_eq!(Store::open_read_only(dir.path()).unwrap().raw_count(), 2);
    }

    #[test]
    fn invalid_record_rejects_whole_batch() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = Store::open(dir.path(), "p").unwrap();
        let mut bad = issue("x", 3);
        if let Payload::Issue(i) = &mut bad.payload {
            i.updated = day(1);
        }
        assert!(store.append(vec![sample(1), bad]).is_err());
        assert_eq!(store.raw_count(), 0);
    }

    fn snapshot(id: &str, at: i64, value: f64) -> Snapshot {
        let mut entries = BTreeMap::new();
        for (el, stratum) in [
            ("maintainability", Stratum::Aspect),
            ("code_quality", Stratum::Factor),
            ("non_complex_files", Stratum::Metric),
        ] {
            entries.insert(
                el.to_string(),
                SnapshotEntry {
                    stratum,
                    value: Some(value),
                    color: Color::Green,
                    n_entities: 3,
                    raw_summary: BTreeMap::from([("files".to_string(), 3.0)]),
                    offenders: vec![],
                },
            );
        }
        Snapshot {
            snapshot_id: id.into(),
            evaluated_at: day(at),
            window: Window::new(day(at - 14), day(at)),
            transient: false,
            entries,
        }
    }

    #[test]
    fn snapshot_round_trip_and_series() {
        let dir = tempfile::tempdir().unwrap();
        let (s1, s2) = (snapshot("s1", 10, 0.9), snapshot("s2", 20, 1.0 / 3.0));
        {
            let mut store = Store::open(dir.path(), "p").unwrap();
            store.save_snapshot(&s2).unwrap();
            store.save_snapshot(&s1).unwrap();
            assert!(store.save_snapshot(&s1).is_err());
        }
        let store = Store::open_read_only(dir.path()).unwrap();
        let all = store.query_snapshots(&Window::all_time());
        assert_eq!(all, vec![s1.clone(), s2.clone()]);
        let narrow = store.query_snapshots(&Window::new(day(15), day(25)));
        assert_eq!(narrow, vec![s2.clone()]);
        let series = store.element_series("maintainability", &Window::all_time());
        assert_eq!(series.len(), 2);
        assert_eq!(series[1].value, Some(1.0 / 3.0));
        assert_eq!(store.latest_snapshot(), Some(&s2));
    }

    #[test]
    fn transient_snapshots_are_refused() {
        let dir = tempfile::tempdir().unwrap();
        let mut store = Store::open(dir.path(), "p").unwrap();
        let mut s = snapshot("t", 5, 0.5);
        s.transient = true;
        assert!(store.save_snapshot(&s).is_err());
    }

    #[test]
    fn uncommitted_snapshot_is_invisible() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut store = Store::open(dir.path(), "p").unwrap();
            store.save_snapshot(&snapshot("s1", 10, 0.9)).unwrap();
        }
        // simulate a crash after the metric stratum of a second snapshot was written
        let metrics = fs::read_to_string(dir.path().join(METRICS)).unwrap();
        let orphan = metrics.replace("\"s1\"", "\"s2\"");
        append_bytes(&dir.path().join(METRICS), orphan.as_bytes()).unwrap();
        let store = Store::open_read_only(dir.path()).unwrap();
        assert_eq!(store.snapshots().len(), 1);
    }
}
