use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

/// Error body of every failed request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone)]
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

    pub fn no_model() -> Self {
        Self::new(StatusCode::SERVICE_UNAVAILABLE, "no_model", "no model is loaded")
    }

    pub fn unknown_session(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session `{id}`"))
    }

    pub fn expired_session(id: &str) -> Self {
        Self::new(
            StatusCode::GONE,
            "session_expired",
            format!("session `{id}` has expired"),
        )
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<latorg::Error> for ApiError {
    fn from(e: latorg::Error) -> Self {
        use latorg::Error as E;
        let message = e.to_string();
        match e {
            E::DegenerateRange(_) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "degenerate_attribute", message),
            E::Range { .. } => Self::new(StatusCode::BAD_REQUEST, "out_of_range", message),
            E::UnknownAttribute(_) => Self::new(StatusCode::BAD_REQUEST, "unknown_attribute", message),
            E::Degradation(_) => Self::new(StatusCode::BAD_REQUEST, "bad_degradation", message),
            E::Dimension { .. } | E::Config(_) | E::Quantize { .. } => Self::bad_request(message),
            _ => Self::internal(message),
        }
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
