use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};
use traitwave_core::session::SessionError;

/// Error body returned by every endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn unknown_session(id: &str) -> Self {
        Self::new(
            StatusCode::NOT_FOUND,
            "unknown_session",
            format!("no session `{id}`"),
        )
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let (status, code) = match &e {
            SessionError::EmptyPhaseBuffer(_) => (StatusCode::CONFLICT, "empty_phase_buffer"),
            SessionError::InvalidTransition(_) => (StatusCode::CONFLICT, "invalid_transition"),
            SessionError::WrongPhase { .. } => (StatusCode::CONFLICT, "wrong_phase"),
            SessionError::BadRatingCount(_) => {
                (StatusCode::UNPROCESSABLE_ENTITY, "bad_rating_count")
            }
            SessionError::InvalidRating(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_rating"),
            SessionError::SatisfactionOutOfRange(_) => (
                StatusCode::UNPROCESSABLE_ENTITY,
                "satisfaction_out_of_range",
            ),
            SessionError::EmptyInput => (StatusCode::NOT_FOUND, "no_reports"),
            SessionError::Prediction(_) => (StatusCode::INTERNAL_SERVER_ERROR, "prediction_failed"),
        };
        Self::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            code: self.code.to_string(),
            message: self.message,
        };
        (self.status, Json(body)).into_response()
    }
}
