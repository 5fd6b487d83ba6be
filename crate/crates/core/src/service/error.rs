use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use serde_json::Value;

use crate::corpus::CorpusError;
use crate::engine::EngineError;

/// Error body: `{error_code, message, detail}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub detail: Value,
}

#[derive(Serialize)]
struct Body<'a> {
    error_code: &'a str,
    message: &'a str,
    detail: &'a Value,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
            detail: Value::Null,
        }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = detail;
        self
    }

    pub fn not_found(what: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "not_found", format!("{what} not found"))
    }

    pub fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn conflict(code: &'static str, message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::CONFLICT, code, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Body {
            error_code: self.code,
            message: &self.message,
            detail: &self.detail,
        };
        (self.status, Json(&body)).into_response()
    }
}

impl From<CorpusError> for ApiError {
    fn from(e: CorpusError) -> Self {
        use serde_json::json;
        let (code, detail) = match &e {
            CorpusError::NotUtf8 { offset } => ("not_utf8", json!({ "offset": offset })),
            CorpusError::MalformedRis { line, reason } => ("malformed_ris", json!({ "line": line, "reason": reason })),
            CorpusError::CsvSyntax { line, reason } => ("csv_syntax", json!({ "line": line, "reason": reason })),
            CorpusError::BadHeader => ("bad_header", Value::Null),
            CorpusError::AmbiguousLabels(cols) => ("ambiguous_labels", json!({ "columns": cols })),
            CorpusError::BadLabelValue { row, value } => ("bad_label_value", json!({ "row": row, "value": value })),
            CorpusError::EmptyDataset => ("empty_dataset", Value::Null),
            CorpusError::UnsupportedSpreadsheet(kind) => ("unsupported_spreadsheet", json!({ "kind": kind })),
            CorpusError::EmptyQuery => {
                return ApiError::bad_request("empty_query", e.to_string());
            }
            CorpusError::Io { path, reason } => {
                return ApiError::internal(e.to_string()).with_detail(json!({ "path": path, "reason": reason }));
            }
        };
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, code, e.to_string()).with_detail(detail)
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        use StatusCode as S;
        let (status, code) = match &e {
            EngineError::NoPriorIncluded => (S::BAD_REQUEST, "no_prior_included"),
            EngineError::NoPriorExcluded => (S::BAD_REQUEST, "no_prior_excluded"),
            EngineError::OverlappingPriors(_) => (S::BAD_REQUEST, "overlapping_priors"),
            EngineError::UnknownRowId(_) => (S::NOT_FOUND, "unknown_row_id"),
            EngineError::TooFewRecords(_) => (S::BAD_REQUEST, "too_few_records"),
            EngineError::AlreadyLabeled(_) => (S::CONFLICT, "already_labeled"),
            EngineError::PoolExhausted => (S::CONFLICT, "pool_exhausted"),
            EngineError::Stopped => (S::CONFLICT, "stopped"),
            EngineError::InvalidSettings(_) => (S::BAD_REQUEST, "invalid_settings"),
            EngineError::InvalidCombination(_) => (S::BAD_REQUEST, "invalid_combination"),
            EngineError::FingerprintMismatch { .. } => (S::INTERNAL_SERVER_ERROR, "fingerprint_mismatch"),
            EngineError::CorruptState { .. } => (S::INTERNAL_SERVER_ERROR, "corrupt_state"),
            EngineError::VersionUnsupported(_) => (S::INTERNAL_SERVER_ERROR, "version_unsupported"),
            EngineError::Features(_) => (S::UNPROCESSABLE_ENTITY, "features"),
            EngineError::Classify(_) => (S::UNPROCESSABLE_ENTITY, "classify"),
            EngineError::Strategy(_) => (S::UNPROCESSABLE_ENTITY, "strategy"),
        };
        ApiError::new(status, code, e.to_string())
    }
}
