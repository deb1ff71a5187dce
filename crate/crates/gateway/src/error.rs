use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use drs_core::diff::DiffError;
use drs_core::predict::PredictError;
use drs_core::scoring::ScoreError;

use crate::hosting::HostingError;
use crate::wire::ErrorBody;

/// An error response: status plus a JSON [`ErrorBody`].
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                error: code.to_string(),
                message: message.into(),
                retry_after: None,
            },
        }
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "InvalidPayload", message)
    }
}

impl From<ScoreError> for ApiError {
    fn from(e: ScoreError) -> Self {
        let msg = e.to_string();
        match e {
            ScoreError::BackendTimeout(_) => Self::new(StatusCode::GATEWAY_TIMEOUT, "BackendTimeout", msg),
            ScoreError::DiffTooLarge { .. } => Self::new(StatusCode::PAYLOAD_TOO_LARGE, "DiffTooLarge", msg),
            ScoreError::EmptyPayload => Self::invalid(msg),
            ScoreError::BackendUnavailable(_) | ScoreError::MalformedBackendResponse(_) => {
                Self::new(StatusCode::BAD_GATEWAY, "BackendFailure", msg)
            }
            ScoreError::DegenerateTrainingSet(_) | ScoreError::InvalidConfig(_) => {
                Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", msg)
            }
        }
    }
}

impl From<PredictError> for ApiError {
    fn from(e: PredictError) -> Self {
        let msg = e.to_string();
        match e {
            PredictError::InvalidPayload(_) | PredictError::Diff(DiffError::MalformedDiff) => Self::invalid(msg),
            PredictError::DiffTooLarge { .. } => Self::new(StatusCode::PAYLOAD_TOO_LARGE, "DiffTooLarge", msg),
            PredictError::Diff(DiffError::BudgetTooSmall { .. }) => {
                Self::new(StatusCode::PAYLOAD_TOO_LARGE, "BudgetTooSmall", msg)
            }
            PredictError::Diff(_) => Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", msg),
            PredictError::Score(s) => s.into(),
        }
    }
}

impl From<HostingError> for ApiError {
    fn from(e: HostingError) -> Self {
        let msg = e.to_string();
        match e {
            HostingError::Unauthorized => Self::new(StatusCode::UNAUTHORIZED, "Unauthorized", msg),
            HostingError::NotFound => Self::new(StatusCode::NOT_FOUND, "CommitNotFound", msg),
            HostingError::RateLimited { retry_after } => {
                let mut err = Self::new(StatusCode::BAD_GATEWAY, "HostingServiceError", msg);
                err.body.retry_after = retry_after;
                err
            }
            HostingError::Upstream(_) => Self::new(StatusCode::BAD_GATEWAY, "HostingServiceError", msg),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let retry_after = self.body.retry_after;
        let mut resp = (self.status, Json(self.body)).into_response();
        if let Some(secs) = retry_after {
            resp.headers_mut().insert(header::RETRY_AFTER, HeaderValue::from(secs));
        }
        resp
    }
}
