use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, HeaderMap, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post, put};
use axum::{Json, Router};
use quark_core::session::Verdict;
use quark_core::{Session, SessionError, ScoreWeights, Threshold};
use serde::Deserialize;
use serde_json::{json, Value};
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

use crate::error::ApiError;
use crate::state::{AppState, Entry};

type Body<T> = Result<Json<T>, JsonRejection>;
type ApiResult = Result<Response, ApiError>;

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create).get(list_sessions))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/spec", put(update_spec))
        .route("/sessions/{id}/candidates", get(candidates))
        .route("/sessions/{id}/whatif", post(what_if))
        .route("/sessions/{id}/decisions", post(commit))
        .route("/sessions/{id}/decisions/{decision}", delete(retract))
        .route("/sessions/{id}/advance", post(advance))
        .route("/sessions/{id}/end", post(end))
        .route("/sessions/{id}/outcomes", get(outcomes))
        .route("/sessions/{id}/outcomes/{outcome}", post(resolve))
        .route("/sessions/{id}/report", get(report))
        .route("/kb", get(list_kbs))
        .route("/kb/{id}/decisions", get(kb_decisions))
        .route("/kb/{id}/elements", get(kb_elements))
        .route("/kb/{id}/attributes", get(kb_attributes))
        .route("/kb/{id}/kinds", get(kb_kinds))
        .with_state(state)
}

pub fn cors(origins: &[String]) -> CorsLayer {
    let allow = if origins.iter().any(|o| o == "*") {
        AllowOrigin::any()
    } else {
        AllowOrigin::list(origins.iter().filter_map(|o| HeaderValue::from_str(o).ok()))
    };
    CorsLayer::new()
        .allow_origin(allow)
        .allow_methods([Method::GET, Method::POST, Method::PUT, Method::DELETE])
        .allow_headers(Any)
        .expose_headers([header::ETAG, header::LOCATION])
}

/// The router with CORS applied.
pub fn app(state: AppState, origins: &[String]) -> Router {
    router(state).layer(cors(origins))
}

fn etag(version: u64) -> HeaderValue {
    HeaderValue::from_str(&format!("\"{version}\"")).expect("digits are a valid header value")
}

fn with_version(status: StatusCode, version: u64, body: Value) -> Response {
    (status, [(header::ETAG, etag(version))], Json(body)).into_response()
}

fn snapshot(entry: &Entry) -> Value {
    let s = &entry.session;
    json!({
        "id": s.id(),
        "kb_id": entry.kb_id,
        "kb_version": s.kb().version,
        "version": s.version(),
        "iteration": s.iteration(),
        "phase": s.phase(),
        "ended": s.is_ended(),
        "spec_text": s.spec_text(),
        "statements": s.spec().spec.statements,
        "warnings": s.spec().warnings,
        "configuration": s.config(),
        "committed": s.committed(),
        "weights": s.weights(),
        "threshold": s.threshold().value(),
        "log": s.log(),
        "outcomes": s.outcomes(),
        "history": s.history(),
        "analysis": s.analysis(),
    })
}

/// Checks an `If-Match` header against the session version. `*` matches any
/// version.
fn check_version(headers: &HeaderMap, current: u64) -> Result<(), ApiError> {
    let Some(raw) = headers.get(header::IF_MATCH) else {
        return Err(ApiError::new(
            StatusCode::PRECONDITION_REQUIRED,
            "precondition_required",
            "mutations need an If-Match header carrying the session version",
        )
        .with(json!({ "version": current })));
    };
    let raw = raw.to_str().unwrap_or("");
    let matches = raw.split(',').map(str::trim).any(|tag| {
        tag == "*" || tag.trim_start_matches("W/").trim_matches('"').parse::<u64>().ok() == Some(current)
    });
    if matches {
        Ok(())
    } else {
        Err(ApiError::new(StatusCode::CONFLICT, "version_conflict", format!("session is at version {current}"))
            .with(json!({ "version": current, "if_match": raw })))
    }
}

/// Runs `op` on the session under its lock after the version check, persists
/// on success and answers with `status`, the new version and
/// `{..op result, session}`.
fn mutate(
    state: &AppState,
    id: &str,
    headers: &HeaderMap,
    status: StatusCode,
    op: impl FnOnce(&mut Session) -> Result<Value, SessionError>,
) -> ApiResult {
    let slot = state.session(id)?;
    let mut entry = slot.lock().expect("session lock");
    check_version(headers, entry.session.version())?;
    let mut body = op(&mut entry.session)?;
    state.persist(&entry)?;
    body["session"] = snapshot(&entry);
    Ok(with_version(status, entry.session.version(), body))
}

fn read<T>(state: &AppState, id: &str, f: impl FnOnce(&Entry) -> Result<T, ApiError>) -> Result<(T, u64), ApiError> {
    let slot = state.session(id)?;
    let entry = slot.lock().expect("session lock");
    Ok((f(&entry)?, entry.session.version()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    kb_id: String,
    #[serde(default)]
    spec_text: String,
    weights: Option<ScoreWeights>,
    threshold: Option<f64>,
}

async fn create(State(state): State<AppState>, body: Body<CreateSession>) -> ApiResult {
    let Json(req) = body?;
    let kb = state.kb(&req.kb_id)?;
    let weights = req.weights.unwrap_or_default();
    weights
        .validate()
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_weights", e.to_string()))?;
    let threshold = match req.threshold {
        Some(t) => Threshold::new(t).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_threshold", e))?,
        None => Threshold::default(),
    };
    let id = uuid::Uuid::new_v4().simple().to_string();
    let session = Session::new(&id, kb, &req.spec_text, weights, threshold)?;
    let slot = state.insert(Entry { kb_id: req.kb_id, session })?;
    let entry = slot.lock().expect("session lock");
    let location = HeaderValue::from_str(&format!("/sessions/{id}")).expect("uuid is a valid header value");
    let mut resp = with_version(StatusCode::CREATED, entry.session.version(), snapshot(&entry));
    resp.headers_mut().insert(header::LOCATION, location);
    Ok(resp)
}

async fn list_sessions(State(state): State<AppState>) -> ApiResult {
    let mut out = Vec::new();
    for id in state.session_ids() {
        let slot = state.session(&id)?;
        let e = slot.lock().expect("session lock");
        out.push(json!({
            "id": id,
            "kb_id": e.kb_id,
            "version": e.session.version(),
            "iteration": e.session.iteration(),
            "phase": e.session.phase(),
            "ended": e.session.is_ended(),
        }));
    }
    Ok(Json(json!({ "sessions": out })).into_response())
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let (body, version) = read(&state, &id, |e| Ok(snapshot(e)))?;
    Ok(with_version(StatusCode::OK, version, body))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecUpdate {
    spec_text: String,
}

async fn update_spec(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Body<SpecUpdate>,
) -> ApiResult {
    let Json(req) = body?;
    mutate(&state, &id, &headers, StatusCode::OK, |s| s.update_spec(&req.spec_text).map(|_| json!({})))
}

async fn candidates(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let (body, version) = read(&state, &id, |e| {
        Ok(json!({ "phase": e.session.phase(), "candidates": e.session.candidates() }))
    })?;
    Ok(with_version(StatusCode::OK, version, body))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DecisionRequest {
    decision_id: String,
    #[serde(default)]
    override_note: Option<String>,
}

async fn what_if(State(state): State<AppState>, Path(id): Path<String>, body: Body<DecisionRequest>) -> ApiResult {
    let Json(req) = body?;
    let (body, version) = read(&state, &id, |e| Ok(json!(e.session.what_if(&req.decision_id)?)))?;
    Ok(with_version(StatusCode::OK, version, body))
}

async fn commit(
    State(state): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    body: Body<DecisionRequest>,
) -> ApiResult {
    let Json(req) = body?;
    mutate(&state, &id, &headers, StatusCode::CREATED, |s| {
        s.commit(&req.decision_id, req.override_note.as_deref()).map(|r| json!(r))
    })
}

async fn retract(
    State(state): State<AppState>,
    Path((id, decision)): Path<(String, String)>,
    headers: HeaderMap,
) -> ApiResult {
    mutate(&state, &id, &headers, StatusCode::OK, |s| s.retract(&decision).map(|entry| json!({ "entry": entry })))
}

async fn advance(State(state): State<AppState>, Path(id): Path<String>, headers: HeaderMap) -> ApiResult {
    mutate(&state, &id, &headers, StatusCode::OK, |s| s.advance().map(|phase| json!({ "phase": phase })))
}

async fn end(State(state): State<AppState>, Path(id): Path<String>, headers: HeaderMap) -> ApiResult {
    mutate(&state, &id, &headers, StatusCode::OK, |s| s.end().map(|_| json!({})))
}

async fn outcomes(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let (body, version) = read(&state, &id, |e| Ok(json!({ "outcomes": e.session.outcomes() })))?;
    Ok(with_version(StatusCode::OK, version, body))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Resolution {
    verdict: Verdict,
    #[serde(default)]
    edited_statement: Option<String>,
}

async fn resolve(
    State(state): State<AppState>,
    Path((id, outcome)): Path<(String, String)>,
    headers: HeaderMap,
    body: Body<Resolution>,
) -> ApiResult {
    let Json(req) = body?;
    mutate(&state, &id, &headers, StatusCode::OK, |s| {
        s.resolve_outcome(&outcome, req.verdict, req.edited_statement.as_deref()).map(|o| json!({ "outcome": o }))
    })
}

fn wants_markdown(headers: &HeaderMap) -> bool {
    headers
        .get(header::ACCEPT)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.split(',').any(|t| t.trim().starts_with("text/markdown")))
}

async fn report(State(state): State<AppState>, Path(id): Path<String>, headers: HeaderMap) -> ApiResult {
    let (report, version) = read(&state, &id, |e| Ok(e.session.final_report()))?;
    if wants_markdown(&headers) {
        let content_type = HeaderValue::from_static("text/markdown; charset=utf-8");
        Ok((StatusCode::OK, [(header::CONTENT_TYPE, content_type), (header::ETAG, etag(version))], report.to_markdown())
            .into_response())
    } else {
        Ok(with_version(StatusCode::OK, version, json!(report)))
    }
}

async fn list_kbs(State(state): State<AppState>) -> ApiResult {
    let kbs: Vec<Value> = state
        .kbs()
        .map(|(id, kb)| {
            json!({
                "id": id,
                "version": kb.version,
                "attributes": kb.attributes.len(),
                "kinds": kb.kinds.len(),
                "elements": kb.elements.len(),
                "decisions": kb.decisions.len(),
            })
        })
        .collect();
    Ok(Json(json!({ "knowledge_bases": kbs })).into_response())
}

async fn kb_decisions(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    Ok(Json(json!({ "decisions": state.kb(&id)?.to_document().decisions })).into_response())
}

async fn kb_elements(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    Ok(Json(json!({ "elements": state.kb(&id)?.to_document().elements })).into_response())
}

async fn kb_attributes(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    Ok(Json(json!({ "attributes": state.kb(&id)?.to_document().attributes })).into_response())
}

async fn kb_kinds(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult {
    Ok(Json(json!({ "kinds": state.kb(&id)?.to_document().kinds })).into_response())
}
