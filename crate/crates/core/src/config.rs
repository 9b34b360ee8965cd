//! `config.json`: where the store and model live and how often to assess.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_PROJECT: &str = "default";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    pub store: PathBuf,
    pub model: PathBuf,
    /// Scheduled assessment period; no schedule when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period_minutes: Option<u64>,
    /// Overrides every metric's window for scheduled and CLI runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_days: Option<u32>,
    #[serde(default = "default_port")]
    pub port: u16,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cors_origin: Option<String>,
    #[serde(default = "default_project")]
    pub project: String,
}

fn default_port() -> u16 {
    DEFAULT_PORT
}

fn default_project() -> String {
    DEFAULT_PROJECT.to_string()
}

impl EngineConfig {
    pub fn new(store: impl Into<PathBuf>, model: impl Into<PathBuf>) -> Self {
        EngineConfig {
            store: store.into(),
            model: model.into(),
            period_minutes: None,
            window_days: None,
            port: DEFAULT_PORT,
            cors_origin: None,
            project: default_project(),
        }
    }

    /// Reads a config file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<EngineConfig, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: EngineConfig =
            serde_json::from_str(&text).map_err(|e| ConfigError::Invalid {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        let invalid = |message: &str| ConfigError::Invalid {
            path: path.to_path_buf(),
            message: message.to_string(),
        };
        if cfg.period_minutes == Some(0) {
            return Err(invalid("period_minutes must be at least 1"));
        }
        if cfg.window_days == Some(0) {
            return Err(invalid("window_days must be positive"));
        }
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.store, &mut cfg.model] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}
