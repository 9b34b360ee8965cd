use std::collections::HashMap;

use axum::body::{Body, Bytes};
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{middleware, Json, Router};
use chrono::{DateTime, Utc};
use qgauge_core::assessment::{AssessmentRequest, WhatIfDelta};
use qgauge_core::engine::{Engine, EngineError};
use qgauge_core::ingest::{parse_instant, Format};
use qgauge_core::model::parse_model;
use qgauge_core::records::Window;
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::json;

use crate::error::ApiError;
use crate::AppState;

type ApiResult<T> = Result<T, ApiError>;
type Params = Query<HashMap<String, String>>;

pub(crate) fn routes(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/assessment/current", get(current))
        .route("/assessment/history", get(history))
        .route("/drilldown/:element", get(drilldown))
        .route("/alerts", get(alerts))
        .route("/alerts/:id/ack", post(acknowledge))
        .route("/model", get(get_model).put(put_model))
        .route("/ingest/:format", post(ingest))
        .route("/assess", post(assess))
        .route("/whatif", post(whatif))
        .fallback(not_found)
        .layer(middleware::map_response(error_bodies))
        .with_state(state)
}

/// Gives bodyless error responses produced by the framework (405, 415, ...)
/// an [`ApiError`] body.
async fn error_bodies(resp: Response) -> Response {
    let status = resp.status();
    let is_json = resp
        .headers()
        .get(header::CONTENT_TYPE)
        .is_some_and(|v| v.as_bytes().starts_with(b"application/json"));
    if status.is_success() || status.is_informational() || is_json {
        return resp;
    }
    let reason = status.canonical_reason().unwrap_or("error");
    let code = reason.to_ascii_lowercase().replace(' ', "_");
    let mut out = ApiError::new(status, &code, reason).into_response();
    for (k, v) in resp.headers() {
        if k != header::CONTENT_TYPE && k != header::CONTENT_LENGTH {
            out.headers_mut().insert(k.clone(), v.clone());
        }
    }
    out
}

async fn not_found() -> ApiError {
    ApiError::not_found("no_route", "no such endpoint")
}

fn blocking_err(e: tokio::task::JoinError) -> ApiError {
    ApiError::internal(format!("worker failed: {e}"))
}

/// Runs blocking engine work off the async workers.
async fn on_engine<T, F>(state: &AppState, f: F) -> ApiResult<T>
where
    F: FnOnce(&Engine) -> Result<T, EngineError> + Send + 'static,
    T: Send + 'static,
{
    let engine = state.engine.clone();
    Ok(tokio::task::spawn_blocking(move || f(&engine))
        .await
        .map_err(blocking_err)??)
}

fn instant(params: &HashMap<String, String>, key: &str) -> ApiResult<Option<DateTime<Utc>>> {
    match params.get(key).map(|s| s.trim()).filter(|s| !s.is_empty()) {
        None => Ok(None),
        Some(s) => parse_instant(s)
            .map(Some)
            .ok_or_else(|| ApiError::bad_request("malformed_window", format!("cannot read {key}={s:?} as a timestamp"))),
    }
}

fn count(params: &HashMap<String, String>, key: &str) -> ApiResult<Option<usize>> {
    match params.get(key) {
        None => Ok(None),
        Some(s) => s
            .parse()
            .map(Some)
            .map_err(|_| ApiError::bad_request("malformed_query", format!("{key} must be a non-negative integer"))),
    }
}

fn window(params: &HashMap<String, String>) -> ApiResult<Option<Window>> {
    let from = instant(params, "from")?;
    let to = instant(params, "to")?;
    if from.is_none() && to.is_none() {
        return Ok(None);
    }
    let all = Window::all_time();
    let w = Window::new(from.unwrap_or(all.from), to.unwrap_or(all.to));
    if w.from >= w.to {
        return Err(ApiError::bad_request("malformed_window", "from must be before to"));
    }
    Ok(Some(w))
}

fn paginate<T>(items: Vec<T>, params: &HashMap<String, String>) -> ApiResult<Vec<T>> {
    let offset = count(params, "offset")?.unwrap_or(0);
    let limit = count(params, "limit")?.unwrap_or(usize::MAX);
    Ok(items.into_iter().skip(offset).take(limit).collect())
}

fn json_body<T: DeserializeOwned>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request("malformed_body", e.to_string()))
}

async fn health() -> Json<serde_json::Value> {
    Json(json!({"status": "ok"}))
}

async fn current(State(s): State<AppState>) -> ApiResult<Response> {
    let snapshot = s.engine.current().ok_or_else(|| ApiError::from(EngineError::NoSnapshot))?;
    Ok(Json(snapshot).into_response())
}

async fn history(State(s): State<AppState>, Query(params): Params) -> ApiResult<Response> {
    let element = params
        .get("element")
        .filter(|e| !e.is_empty())
        .ok_or_else(|| ApiError::bad_request("missing_element", "query parameter element is required"))?;
    let w = window(&params)?.unwrap_or_else(Window::all_time);
    let points = s.engine.history(element, &w)?;
    Ok(Json(paginate(points, &params)?).into_response())
}

async fn drilldown(State(s): State<AppState>, Path(element): Path<String>) -> ApiResult<Response> {
    Ok(Json(s.engine.drilldown(&element)?).into_response())
}

async fn alerts(State(s): State<AppState>, Query(params): Params) -> ApiResult<Response> {
    let since = instant(&params, "since")?;
    Ok(Json(paginate(s.engine.alerts(since), &params)?).into_response())
}

async fn acknowledge(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let alert = on_engine(&s, move |e| e.acknowledge(&id, Utc::now())).await?;
    Ok(Json(alert).into_response())
}

async fn get_model(State(s): State<AppState>) -> Response {
    let mut resp = Body::from(s.engine.model().to_json()).into_response();
    resp.headers_mut()
        .insert(header::CONTENT_TYPE, HeaderValue::from_static("application/json"));
    resp
}

async fn put_model(State(s): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let text = std::str::from_utf8(&body).map_err(|_| ApiError::bad_request("malformed_model", "body is not UTF-8"))?;
    let model = parse_model(text)?;
    s.engine.replace_model(model)?;
    Ok(Json(json!({"status": "replaced"})).into_response())
}

async fn ingest(
    State(s): State<AppState>,
    Path(format): Path<String>,
    Query(params): Params,
    body: Bytes,
) -> ApiResult<Response> {
    let format: Format = format
        .parse()
        .map_err(|e: qgauge_core::ingest::IngestError| ApiError::not_found("unknown_format", e.to_string()))?;
    let text = String::from_utf8_lossy(&body).into_owned();
    let build_id = params.get("build_id").cloned();
    let report = on_engine(&s, move |e| {
        let mut ctx = e.ingest_context(Utc::now());
        ctx.build_id = build_id;
        e.ingest(format, &text, &ctx)
    })
    .await?;
    Ok(Json(report).into_response())
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AssessBody {
    from: Option<String>,
    to: Option<String>,
    window_days: Option<u32>,
}

#[derive(Serialize)]
struct AssessResponse {
    snapshot_id: String,
    evaluated_at: DateTime<Utc>,
    window: Window,
    alerts: Vec<qgauge_core::alerts::Alert>,
}

async fn assess(State(s): State<AppState>, body: Bytes) -> ApiResult<Response> {
    let req: AssessBody = if body.iter().all(u8::is_ascii_whitespace) {
        AssessBody::default()
    } else {
        json_body(&body)?
    };
    let mut params = HashMap::new();
    params.extend(req.from.map(|v| ("from".to_string(), v)));
    params.extend(req.to.map(|v| ("to".to_string(), v)));
    let now = Utc::now();
    let request = match window(&params)? {
        Some(w) => AssessmentRequest::explicit(w, now),
        None => AssessmentRequest::trailing(req.window_days.or(s.window_days), now),
    };
    let out = on_engine(&s, move |e| e.assess(&request)).await?;
    let resp = AssessResponse {
        snapshot_id: out.snapshot.snapshot_id,
        evaluated_at: out.snapshot.evaluated_at,
        window: out.snapshot.window,
        alerts: out.alerts,
    };
    Ok((StatusCode::CREATED, Json(resp)).into_response())
}

async fn whatif(State(s): State<AppState>, Query(params): Params, body: Bytes) -> ApiResult<Response> {
    let delta: WhatIfDelta = json_body(&body)?;
    let w = window(&params)?;
    let snapshot = on_engine(&s, move |e| e.what_if(w, &delta, Utc::now())).await?;
    Ok(Json(snapshot).into_response())
}
