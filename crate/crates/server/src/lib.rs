//! HTTP + JSON front of the assessment engine.
//!
//! Handlers are thin: every value in a response comes from [`Engine`], so
//! the API and the CLI share one code path.

mod error;
mod routes;

use std::future::Future;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::http::HeaderValue;
use axum::Router;
use chrono::Duration;
use qgauge_core::config::EngineConfig;
use qgauge_core::engine::{Engine, EngineError};
use qgauge_core::schedule::{ScheduleError, SystemTicker};
use thiserror::Error;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

pub use error::ApiError;

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid CORS origin {0:?}")]
    CorsOrigin(String),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("server error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Default)]
pub struct ApiOptions {
    /// Origin allowed by CORS; any origin when `None`.
    pub cors_origin: Option<String>,
    /// Trailing window for POST /assess without a window; each metric's own
    /// window when `None`.
    pub window_days: Option<u32>,
}

#[derive(Clone)]
pub(crate) struct AppState {
    pub engine: Arc<Engine>,
    pub window_days: Option<u32>,
}

/// The full route table over `engine`.
pub fn router(engine: Arc<Engine>, options: &ApiOptions) -> Result<Router, ServeError> {
    let cors = match &options.cors_origin {
        None => CorsLayer::new().allow_origin(Any),
        Some(o) => {
            let v = HeaderValue::from_str(o).map_err(|_| ServeError::CorsOrigin(o.clone()))?;
            CorsLayer::new().allow_origin(AllowOrigin::list([v]))
        }
    }
    .allow_methods(Any)
    .allow_headers(Any);
    let state = AppState {
        engine,
        window_days: options.window_days,
    };
    Ok(routes::routes(state).layer(cors))
}

/// Opens the model and store named by `config`.
pub fn open_engine(config: &EngineConfig) -> Result<Arc<Engine>, EngineError> {
    Ok(Arc::new(Engine::open(&config.model, &config.store, &config.project)?))
}

/// Serves `engine` on `listener` until `shutdown` resolves. Runs the
/// assessment schedule when the config sets a period.
pub async fn serve_on<S>(
    listener: tokio::net::TcpListener,
    engine: Arc<Engine>,
    config: &EngineConfig,
    shutdown: S,
) -> Result<(), ServeError>
where
    S: Future<Output = ()> + Send + 'static,
{
    let options = ApiOptions {
        cors_origin: config.cors_origin.clone(),
        window_days: config.window_days,
    };
    let app = router(engine.clone(), &options)?;
    let schedule = match config.period_minutes {
        Some(m) => Some(engine.schedule(
            Duration::minutes(m as i64),
            SystemTicker::new(),
            config.window_days,
        )?),
        None => None,
    };
    if let Ok(addr) = listener.local_addr() {
        tracing::info!(%addr, "serving");
    }
    let result = axum::serve(listener, app).with_graceful_shutdown(shutdown).await;
    if let Some(h) = schedule {
        h.cancel();
        let stats = tokio::task::spawn_blocking(move || h.join()).await.unwrap_or_default();
        tracing::info!(runs = stats.runs, skipped = stats.skipped, failures = stats.failures, "schedule stopped");
    }
    Ok(result?)
}

/// Loads the config's model and store, binds `127.0.0.1:port` and serves
/// until interrupted.
pub async fn serve(config: EngineConfig) -> Result<(), ServeError> {
    let engine = open_engine(&config)?;
    let addr = SocketAddr::from(([127, 0, 0, 1], config.port));
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| ServeError::Bind { addr, source })?;
    serve_on(listener, engine, &config, async {
        let _ = tokio::signal::ctrl_c().await;
        tracing::info!("shutting down");
    })
    .await
}
