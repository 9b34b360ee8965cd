//! Periodic assessment runs and the single-flight guard shared with manual
//! runs.

use std::fmt::Display;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::JoinHandle;

use chrono::{DateTime, Duration, Utc};
use thiserror::Error;

/// At most one holder at a time; acquisition never blocks.
#[derive(Debug, Default)]
pub struct SingleFlight {
    busy: AtomicBool,
}

#[derive(Debug)]
pub struct FlightGuard<'a> {
    flight: &'a SingleFlight,
}

impl SingleFlight {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn try_acquire(&self) -> Option<FlightGuard<'_>> {
        self.busy
            .compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire)
            .ok()
            .map(|_| FlightGuard { flight: self })
    }

    pub fn is_busy(&self) -> bool {
        self.busy.load(Ordering::Acquire)
    }
}

impl Drop for FlightGuard<'_> {
    fn drop(&mut self) {
        self.flight.busy.store(false, Ordering::Release);
    }
}

/// Source of time for the scheduler loop.
pub trait Ticker: Send {
    fn now(&self) -> DateTime<Utc>;
    /// Blocks until `t`; false once the ticker is exhausted or cancelled.
    fn wait_until(&mut self, t: DateTime<Utc>) -> bool;
    /// Wakes a pending [`Ticker::wait_until`] so it returns false.
    fn cancel(&self);
}

#[derive(Default)]
struct CancelFlag {
    cancelled: Mutex<bool>,
    cv: Condvar,
}

/// Wall-clock ticker.
#[derive(Clone, Default)]
pub struct SystemTicker {
    flag: Arc<CancelFlag>,
}

impl SystemTicker {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Ticker for SystemTicker {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }

    fn wait_until(&mut self, t: DateTime<Utc>) -> bool {
        let mut cancelled = self.flag.cancelled.lock().expect("cancel flag poisoned");
        loop {
            if *cancelled {
                return false;
            }
            let left = t - Utc::now();
            if left <= Duration::zero() {
                return true;
            }
            let left = left.to_std().unwrap_or_default();
            cancelled = self
                .flag
                .cv
                .wait_timeout(cancelled, left)
                .expect("cancel flag poisoned")
                .0;
        }
    }

    fn cancel(&self) {
        *self.flag.cancelled.lock().expect("cancel flag poisoned") = true;
        self.flag.cv.notify_all();
    }
}

/// Simulated clock for tests: waiting jumps the clock forward; the job may
/// advance it further to model a long run. Time stops at `end`.
#[derive(Clone)]
pub struct SimulatedTicker {
    clock: Arc<Mutex<DateTime<Utc>>>,
    end: DateTime<Utc>,
    cancelled: Arc<AtomicBool>,
}

impl SimulatedTicker {
    pub fn new(start: DateTime<Utc>, end: DateTime<Utc>) -> Self {
        SimulatedTicker {
            clock: Arc::new(Mutex::new(start)),
            end,
            cancelled: Arc::new(AtomicBool::new(false)),
        }
    }

    pub fn advance(&self, by: Duration) {
        *self.clock.lock().expect("clock poisoned") += by;
    }
}

impl Ticker for SimulatedTicker {
    fn now(&self) -> DateTime<Utc> {
        *self.clock.lock().expect("clock poisoned")
    }

    fn wait_until(&mut self, t: DateTime<Utc>) -> bool {
        if self.cancelled.load(Ordering::Acquire) || t > self.end {
            return false;
        }
        let mut clock = self.clock.lock().expect("clock poisoned");
        if *clock < t {
            *clock = t;
        }
        true
    }

    fn cancel(&self) {
        self.cancelled.store(true, Ordering::Release);
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ScheduleError {
    #[error("period must be at least one minute, got {0} s")]
    PeriodTooShort(i64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScheduleStats {
    pub runs: usize,
    pub failures: usize,
    pub skipped: usize,
}

#[derive(Default)]
struct Counters {
    runs: AtomicUsize,
    failures: AtomicUsize,
    skipped: AtomicUsize,
}

impl Counters {
    fn snapshot(&self) -> ScheduleStats {
        ScheduleStats {
            runs: self.runs.load(Ordering::Acquire),
            failures: self.failures.load(Ordering::Acquire),
            skipped: self.skipped.load(Ordering::Acquire),
        }
    }
}

/// A running schedule. Dropping the handle does not stop it; call
/// [`ScheduleHandle::cancel`].
pub struct ScheduleHandle {
    cancel: Box<dyn Fn() + Send + Sync>,
    counters: Arc<Counters>,
    thread: Option<JoinHandle<()>>,
}

impl ScheduleHandle {
    pub fn cancel(&self) {
        (self.cancel)();
    }

    pub fn stats(&self) -> ScheduleStats {
        self.counters.snapshot()
    }

    /// Waits for the loop to end (ticker exhausted or cancelled).
    pub fn join(mut self) -> ScheduleStats {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
        self.counters.snapshot()
    }
}

/// Runs `job` once per `period`, on a background thread, until the ticker
/// runs out or the handle is cancelled. The first run happens one period
/// after start. A tick is skipped with a warning when `flight` is already
/// held (a manual run is active) or when the previous run overran the tick.
pub fn schedule_assessments<T, F, E>(
    period: Duration,
    mut ticker: T,
    flight: Arc<SingleFlight>,
    mut job: F,
) -> Result<ScheduleHandle, ScheduleError>
where
    T: Ticker + Clone + Sync + 'static,
    F: FnMut(DateTime<Utc>) -> Result<String, E> + Send + 'static,
    E: Display,
{
    if period < Duration::minutes(1) {
        return Err(ScheduleError::PeriodTooShort(period.num_seconds()));
    }
    let counters = Arc::new(Counters::default());
    let c = counters.clone();
    let canceller = ticker.clone();
    let thread = std::thread::spawn(move || {
        let mut next = ticker.now() + period;
        while ticker.wait_until(next) {
            let now = ticker.now();
            match flight.try_acquire() {
                None => {
                    tracing::warn!(tick = %next, "assessment still running; tick skipped");
                    c.skipped.fetch_add(1, Ordering::AcqRel);
                }
                Some(_guard) => match job(now) {
                    Ok(id) => {
                        tracing::info!(snapshot = %id, "scheduled assessment done");
                        c.runs.fetch_add(1, Ordering::AcqRel);
                    }
                    Err(e) => {
                        tracing::error!(error = %e, "scheduled assessment failed");
                        c.failures.fetch_add(1, Ordering::AcqRel);
                    }
                },
            }
            next += period;
            let after = ticker.now();
            while next <= after {
                tracing::warn!(tick = %next, "previous assessment overran; tick skipped");
                c.skipped.fetch_add(1, Ordering::AcqRel);
                next += period;
            }
        }
    });
    Ok(ScheduleHandle {
        cancel: Box::new(move || canceller.cancel()),
        counters,
        thread: Some(thread),
    })
}
