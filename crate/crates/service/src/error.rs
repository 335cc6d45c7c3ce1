use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use qgms_core::blind_harness::HarnessError;
use serde::Serialize;

/// Error body: `{code, message}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ErrorBody {
    pub code: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, body: ErrorBody { code, message: message.into() } }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "BAD_REQUEST", message)
    }

    pub fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "NOT_FOUND", format!("no session {id}"))
    }

    pub fn storage(err: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "STORAGE_ERROR", err.to_string())
    }
}

impl From<HarnessError> for ApiError {
    fn from(err: HarnessError) -> Self {
        let (status, code) = match &err {
            HarnessError::SessionSealed => (StatusCode::CONFLICT, "SESSION_SEALED"),
            HarnessError::SessionRevealed | HarnessError::AlreadyRevealed => (StatusCode::CONFLICT, "SESSION_REVEALED"),
            HarnessError::NotStarted => (StatusCode::CONFLICT, "NOT_STARTED"),
            HarnessError::LookaheadRejected { .. } => (StatusCode::CONFLICT, "LOOKAHEAD_REJECTED"),
            HarnessError::EmptySeries => (StatusCode::BAD_REQUEST, "EMPTY_SERIES"),
            HarnessError::MalformedLedger(_) | HarnessError::MalformedManifest(_) => {
                (StatusCode::INTERNAL_SERVER_ERROR, "STORAGE_ERROR")
            }
            HarnessError::CommitmentMismatch | HarnessError::Serialization(_) => {
                (StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL")
            }
        };
        ApiError::new(status, code, err.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}
