// Drive the HTTP interface in-process.
//
// `cargo run --example http_service`
//
// The same router is served by `workbench serve --addr 127.0.0.1:8080`.

use std::error::Error;
use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use concept_workbench::service::http::router;
use concept_workbench::Workbench;
use serde_json::{json, Value};
use tower::ServiceExt;

fn fixture(name: &str) -> String {
    let path = format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> Result<(StatusCode, String), Box<dyn Error>> {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))?;
    let resp = app.clone().oneshot(req).await?;
    let status = resp.status();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await?;
    Ok((status, String::from_utf8(bytes.to_vec())?))
}

async fn demo() -> Result<(), Box<dyn Error>> {
    let app = router(Arc::new(Workbench::in_memory()));

    let (status, body) = call(
        &app,
        Method::POST,
        "/sessions",
        Some(json!({"corpus": fixture("survey_corpus.xml"), "ontology": fixture("survey_ontology.xml")})),
    )
    .await?;
    println!("POST /sessions -> {status}");
    let id = serde_json::from_str::<Value>(&body)?["id"].as_str().ok_or("no id")?.to_string();

    let phases = [
        json!({"name": "start", "phase": "start_investigation", "parameters": {"attributes": ["KD", "IR", "SE", "ONT"]}}),
        json!({"name": "fca", "phase": "compose_artifact", "parameters": {"output": "lattice", "kind": "fca"}}),
    ];
    for p in phases {
        let (status, body) = call(&app, Method::POST, &format!("/sessions/{id}/phases"), Some(p)).await?;
        println!("POST phases -> {status} {body}");
    }

    let (_, cxt) = call(&app, Method::GET, &format!("/sessions/{id}/artifacts/context?format=cxt"), None).await?;
    print!("{cxt}");
    let (_, lattice) = call(&app, Method::GET, &format!("/sessions/{id}/artifacts/lattice"), None).await?;
    let lattice: Value = serde_json::from_str(&lattice)?;
    println!("lattice has {} nodes", lattice["nodes"].as_array().map_or(0, Vec::len));

    let (status, doc) = call(&app, Method::GET, &format!("/sessions/{id}/documents/P1"), None).await?;
    println!("GET documents/P1 -> {status}: {}", &doc[..doc.len().min(80)]);

    // Composing without a context is refused with 409.
    let (status, body) = call(
        &app,
        Method::POST,
        &format!("/sessions/{id}/phases"),
        Some(json!({"name": "x", "phase": "compose_artifact", "parameters": {"output": "y", "context": "nope", "kind": "fca"}})),
    )
    .await?;
    println!("missing context -> {status} {body}");

    let (_, links) = call(&app, Method::GET, &format!("/sessions/{id}/links"), None).await?;
    println!("link sweep: {links}");
    Ok(())
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?
        .block_on(demo())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
