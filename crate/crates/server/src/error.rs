use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use qgauge_core::assessment::AssessmentError;
use qgauge_core::engine::EngineError;
use qgauge_core::model::{ModelError, Violation};
use qgauge_core::store::StoreError;
use serde::Serialize;

/// Body of every non-2xx response.
#[derive(Debug, Clone, Serialize)]
pub struct ApiError {
    pub status: u16,
    pub code: String,
    pub detail: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Violation>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, detail: impl Into<String>) -> Self {
        ApiError {
            status: status.as_u16(),
            code: code.to_string(),
            detail: detail.into(),
            violations: Vec::new(),
        }
    }

    pub fn bad_request(code: &str, detail: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, detail)
    }

    pub fn not_found(code: &str, detail: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, code, detail)
    }

    pub fn internal(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", detail)
    }

    fn invalid_model(violations: Vec<Violation>) -> Self {
        let detail = violations
            .iter()
            .map(|v| v.message.as_str())
            .collect::<Vec<_>>()
            .join("; ");
        ApiError {
            violations,
            ..Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_model", detail)
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let mut resp = (status, Json(&self)).into_response();
        resp.headers_mut()
            .insert(header::CONTENT_TYPE, HeaderValue::from_static("application/json"));
        resp
    }
}

impl From<ModelError> for ApiError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Syntax { .. } => ApiError::bad_request("malformed_model", e.to_string()),
            _ => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_model", e.to_string()),
        }
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let detail = e.to_string();
        match e {
            EngineError::InvalidModel(v) => ApiError::invalid_model(v),
            EngineError::Model(m) => m.into(),
            EngineError::Busy => ApiError::new(StatusCode::CONFLICT, "busy", detail),
            EngineError::NoSnapshot => ApiError::not_found("no_snapshot", detail),
            EngineError::UnknownElement(_) => ApiError::not_found("unknown_element", detail),
            EngineError::Ingest(_) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "unparseable_input", detail)
            }
            EngineError::Store(StoreError::UnknownAlert(_)) => ApiError::not_found("unknown_alert", detail),
            EngineError::Store(StoreError::InvalidRecord { .. }) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_record", detail)
            }
            EngineError::Store(StoreError::Locked(_)) => ApiError::new(StatusCode::CONFLICT, "store_locked", detail),
            EngineError::Assessment(AssessmentError::InvalidWindow { .. }) => {
                ApiError::bad_request("malformed_window", detail)
            }
            EngineError::Assessment(AssessmentError::Delta(_)) => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_delta", detail)
            }
            _ => ApiError::internal(detail),
        }
    }
}
