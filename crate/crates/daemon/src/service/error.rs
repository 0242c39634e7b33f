use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;

use crate::camera::CameraError;
use crate::store::StoreError;

/// Non-image failure: a status code and a one-line JSON body.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }

    pub fn unauthorized() -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "missing, invalid or expired session token")
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

impl From<CameraError> for ApiError {
    fn from(e: CameraError) -> Self {
        let status = match e {
            CameraError::UnknownCamera(_) => StatusCode::NOT_FOUND,
            CameraError::NoFrameYet(_) | CameraError::Source { .. } => StatusCode::SERVICE_UNAVAILABLE,
        };
        Self::new(status, e.to_string())
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match e {
            StoreError::NotFound(_) => StatusCode::NOT_FOUND,
            StoreError::EmptyImage => StatusCode::INTERNAL_SERVER_ERROR,
            StoreError::StorageFull | StoreError::Io(_) => StatusCode::INSUFFICIENT_STORAGE,
        };
        Self::new(status, e.to_string())
    }
}
