//! HTTP routes over a [`Workbench`].

use std::collections::HashMap;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::json;

use super::{CreateSession, PhaseRequest, Profile, ServiceError, Workbench, ENDPOINTS};

type Shared = Arc<Workbench>;
type Params = Query<HashMap<String, String>>;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match self {
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(json!({"error": self.to_string(), "kind": self.kind()}))).into_response()
    }
}

fn content_type(format: &str) -> &'static str {
    match format {
        "json" | "checkpoint" | "sequences" => "application/json",
        "xml" => "application/xml",
        "dot" => "text/vnd.graphviz",
        _ => "text/plain; charset=utf-8",
    }
}

fn body(format: &str, text: String) -> Response {
    ([(header::CONTENT_TYPE, content_type(format))], text).into_response()
}

fn json_body(v: impl serde::Serialize) -> Response {
    Json(v).into_response()
}

/// Runs blocking work off the async executor.
async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ServiceError::Internal(format!("worker failed: {e}")))?
}

pub fn router(workbench: Arc<Workbench>) -> Router {
    Router::new()
        .route("/endpoints", get(endpoints))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(session_summary))
        .route("/sessions/{id}/phases", post(run_phase))
        .route("/sessions/{id}/artifacts", get(list_artifacts))
        .route("/sessions/{id}/artifacts/{name}", get(get_artifact))
        .route("/sessions/{id}/documents/{doc}", get(get_document))
        .route("/sessions/{id}/resolve", get(resolve))
        .route("/sessions/{id}/profiles", get(list_profiles))
        .route(
            "/sessions/{id}/profiles/{name}",
            get(get_profile).put(put_profile).delete(delete_profile),
        )
        .route("/sessions/{id}/audit", get(audit))
        .route("/sessions/{id}/replay", post(replay))
        .route("/sessions/{id}/links", get(links))
        .with_state(workbench)
}

/// Serves until the process is stopped.
pub async fn serve(workbench: Arc<Workbench>, addr: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(workbench)).await
}

async fn endpoints() -> Response {
    let rows: Vec<_> = ENDPOINTS
        .iter()
        .map(|(m, p, d)| json!({"method": m, "path": p, "description": d}))
        .collect();
    json_body(rows)
}

async fn create_session(State(wb): State<Shared>, body: String) -> Result<Response, ServiceError> {
    let req: CreateSession =
        serde_json::from_str(&body).map_err(|e| ServiceError::BadRequest(format!("request body: {e}")))?;
    let summary = blocking(move || wb.create_session(&req)).await?;
    Ok((StatusCode::CREATED, Json(summary)).into_response())
}

async fn list_sessions(State(wb): State<Shared>) -> Result<Response, ServiceError> {
    Ok(json_body(wb.list_sessions()?))
}

async fn session_summary(State(wb): State<Shared>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    Ok(json_body(wb.read(&id, |s| Ok(s.summary()))?))
}

async fn run_phase(State(wb): State<Shared>, Path(id): Path<String>, body: String) -> Result<Response, ServiceError> {
    let req: PhaseRequest =
        serde_json::from_str(&body).map_err(|e| ServiceError::BadRequest(format!("phase request: {e}")))?;
    let outcome = blocking(move || wb.run_phase(&id, &req)).await?;
    Ok((StatusCode::CREATED, Json(outcome)).into_response())
}

async fn list_artifacts(State(wb): State<Shared>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    Ok(json_body(wb.read(&id, |s| Ok(s.summary().artifacts))?))
}

async fn get_artifact(
    State(wb): State<Shared>,
    Path((id, name)): Path<(String, String)>,
    Query(q): Params,
) -> Result<Response, ServiceError> {
    let format = q.get("format").map_or("json", String::as_str);
    let payload = q.get("payload").map(String::as_str);
    let text = wb.read(&id, |s| s.get_artifact(&name, format, payload))?;
    Ok(body(format, text))
}

async fn get_document(
    State(wb): State<Shared>,
    Path((id, doc)): Path<(String, String)>,
    Query(q): Params,
) -> Result<Response, ServiceError> {
    let format = q.get("format").map_or("json", String::as_str);
    let text = wb.read(&id, |s| s.get_document(&doc, format))?;
    Ok(body(format, text))
}

async fn resolve(State(wb): State<Shared>, Path(id): Path<String>, Query(q): Params) -> Result<Response, ServiceError> {
    let url = q
        .get("url")
        .ok_or_else(|| ServiceError::BadRequest("missing url parameter".into()))?;
    let object = wb.read(&id, |s| s.resolve_url(url))?;
    Ok(json_body(json!({
        "url": url,
        "object": object,
        "href": format!("/sessions/{id}/documents/{object}"),
    })))
}

async fn list_profiles(State(wb): State<Shared>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    Ok(json_body(wb.read(&id, |s| Ok(s.profiles().values().cloned().collect::<Vec<_>>()))?))
}

async fn get_profile(
    State(wb): State<Shared>,
    Path((id, name)): Path<(String, String)>,
) -> Result<Response, ServiceError> {
    Ok(json_body(wb.read(&id, |s| s.profile(&name).cloned())?))
}

async fn put_profile(
    State(wb): State<Shared>,
    Path((id, name)): Path<(String, String)>,
    body: String,
) -> Result<Response, ServiceError> {
    let profile = Profile::from_json(&body)?;
    if profile.name != name {
        return Err(ServiceError::BadRequest(format!(
            "profile body is named {:?}, path says {name:?}",
            profile.name
        )));
    }
    let hash = profile.hash();
    wb.write(&id, |s| s.put_profile(profile))?;
    Ok(json_body(json!({"name": name, "hash": hash})))
}

async fn delete_profile(
    State(wb): State<Shared>,
    Path((id, name)): Path<(String, String)>,
) -> Result<Response, ServiceError> {
    let removed = wb.write(&id, |s| s.delete_profile(&name))?;
    Ok(json_body(removed))
}

async fn audit(State(wb): State<Shared>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    Ok(json_body(wb.read(&id, |s| Ok(s.audit().to_vec()))?))
}

async fn replay(State(wb): State<Shared>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    let report = blocking(move || wb.read(&id, |s| Ok(s.replay()))).await?;
    Ok(json_body(report))
}

async fn links(State(wb): State<Shared>, Path(id): Path<String>) -> Result<Response, ServiceError> {
    Ok(json_body(wb.read(&id, |s| Ok(s.link_sweep()))?))
}
