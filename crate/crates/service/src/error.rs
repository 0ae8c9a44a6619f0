use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

use sciex_core::Error;

/// The JSON error envelope every endpoint returns on failure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
    pub http_status: u16,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            code: code.to_owned(),
            message: message.into(),
            http_status: status.as_u16(),
        }
    }

    pub fn bad_request(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn unauthorized() -> Self {
        Self::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or invalid bearer token")
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

/// HTTP status for each core error code.
pub fn status_for(error: &Error) -> StatusCode {
    match error {
        Error::NotFound { .. } => StatusCode::NOT_FOUND,
        Error::MalformedXml { .. }
        | Error::NotTei(_)
        | Error::EmptyDocument
        | Error::EmptyText
        | Error::InvalidArgument(_)
        | Error::DimensionMismatch { .. } => StatusCode::BAD_REQUEST,
        Error::DegenerateVector
        | Error::EmptyRetrieval
        | Error::DegenerateRetrieval
        | Error::ProvenanceMismatch { .. }
        | Error::EmptyCategory(_)
        | Error::EmptySplit(_) => StatusCode::UNPROCESSABLE_ENTITY,
        Error::Locked(_) => StatusCode::CONFLICT,
        Error::Provider { retryable: true, .. } => StatusCode::SERVICE_UNAVAILABLE,
        Error::Provider { .. } => StatusCode::BAD_GATEWAY,
        Error::UnsupportedVersion { .. }
        | Error::Corrupted { .. }
        | Error::Io { .. }
        | Error::Config(_) => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        Self::new(status_for(&e), e.code(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.http_status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn not_found_maps_to_404() {
        let e: ApiError = Error::NotFound {
            kind: "paper",
            id: "x".into(),
        }
        .into();
        assert_eq!((e.http_status, e.code.as_str()), (404, "not_found"));
    }
}
