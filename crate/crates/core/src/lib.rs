//! Quality-model assessment engine.
//!
//! Raw development and runtime data is ingested into an append-only store,
//! scored per metric through utility functions, aggregated bottom-up into
//! factors and aspects, and colored against thresholds.

pub mod alerts;
pub mod assessment;
pub mod config;
pub mod engine;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod records;
pub mod schedule;
pub mod snapshot;
pub mod store;
