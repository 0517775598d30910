use axum::extract::rejection::JsonRejection;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use quark_core::speclang::BindError;
use quark_core::SessionError;
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiError {
    #[serde(serialize_with = "status_code")]
    pub status: StatusCode,
    pub kind: &'static str,
    pub message: String,
    pub details: Value,
}

fn status_code<S: serde::Serializer>(status: &StatusCode, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_u16(status.as_u16())
}

impl ApiError {
    pub fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, kind, message: message.into(), details: Value::Null }
    }

    pub fn with(mut self, details: Value) -> Self {
        self.details = details;
        self
    }

    pub fn unknown_session(id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session {id:?}"))
    }

    pub fn unknown_kb(id: &str) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "unknown_kb", format!("no knowledge base {id:?}"))
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

fn bind_details(e: &BindError) -> Value {
    match e {
        BindError::Unresolved(names) => json!({ "unresolved": names }),
        BindError::Contradiction(c) => json!({ "contradictions": c }),
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let message = e.to_string();
        let (status, kind, details) = match &e {
            SessionError::Parse(p) => (StatusCode::UNPROCESSABLE_ENTITY, "parse_error", json!({ "diagnostics": p.0 })),
            SessionError::Bind(b) => (StatusCode::UNPROCESSABLE_ENTITY, "bind_error", bind_details(b)),
            SessionError::Phase { operation, phase } => {
                (StatusCode::CONFLICT, "phase_error", json!({ "operation": operation, "phase": phase }))
            }
            SessionError::Ended => (StatusCode::CONFLICT, "session_ended", Value::Null),
            SessionError::UnknownDecision(d) => (StatusCode::NOT_FOUND, "unknown_decision", json!({ "decision": d })),
            SessionError::AlreadyCommitted(d) => (StatusCode::CONFLICT, "already_committed", json!({ "decision": d })),
            SessionError::NotCommitted(d) => (StatusCode::CONFLICT, "not_committed", json!({ "decision": d })),
            SessionError::OverrideNoteRequired { decision, top } => (
                StatusCode::UNPROCESSABLE_ENTITY,
                "override_note_required",
                json!({ "decision": decision, "top": top }),
            ),
            SessionError::UnknownOutcome(o) => (StatusCode::NOT_FOUND, "unknown_outcome", json!({ "outcome": o })),
            SessionError::AlreadyResolved(o) => (StatusCode::CONFLICT, "already_resolved", json!({ "outcome": o })),
            SessionError::InvalidStatement(_) => (StatusCode::UNPROCESSABLE_ENTITY, "invalid_statement", Value::Null),
            SessionError::VersionMismatch { .. } | SessionError::Schema(_) => {
                (StatusCode::INTERNAL_SERVER_ERROR, "internal", Value::Null)
            }
        };
        ApiError { status, kind, message, details }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        let kind = if r.status() == StatusCode::UNSUPPORTED_MEDIA_TYPE { "unsupported_media_type" } else { "invalid_body" };
        ApiError::new(r.status(), kind, r.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}
