mod common;

use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use common::*;
use concept_workbench::service::http::router;
use concept_workbench::service::{parse_envelope, ENDPOINTS};
use concept_workbench::Workbench;
use serde_json::{json, Value};
use tower::ServiceExt;

struct Reply {
    status: StatusCode,
    content_type: String,
    body: String,
}

impl Reply {
    fn json(&self) -> Value {
        serde_json::from_str(&self.body).unwrap_or_else(|e| panic!("{e}: {}", self.body))
    }
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<String>) -> Reply {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .body(body.map_or_else(Body::empty, Body::from))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let content_type = resp
        .headers()
        .get(header::CONTENT_TYPE)
        .map(|v| v.to_str().unwrap().to_string())
        .unwrap_or_default();
    let body = String::from_utf8(to_bytes(resp.into_body(), usize::MAX).await.unwrap().to_vec()).unwrap();
    Reply { status, content_type, body }
}

async fn session(app: &Router, corpus: &str) -> String {
    let (c, o) = fixture_files(corpus);
    let r = call(
        app,
        Method::POST,
        "/sessions",
        Some(json!({"corpus": fixture(c), "ontology": fixture(o), "source": c}).to_string()),
    )
    .await;
    assert_eq!(r.status, StatusCode::CREATED, "{}", r.body);
    r.json()["id"].as_str().unwrap().to_string()
}

fn app() -> Router {
    router(Arc::new(Workbench::in_memory()))
}

#[tokio::test]
async fn endpoint_table_is_served() {
    let r = call(&app(), Method::GET, "/endpoints", None).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.json().as_array().unwrap().len(), ENDPOINTS.len());
}

#[tokio::test]
async fn full_loop_over_http() {
    let app = app();
    let id = session(&app, "police").await;
    for p in full_loop("police") {
        let r = call(&app, Method::POST, &format!("/sessions/{id}/phases"), Some(serde_json::to_string(&p).unwrap())).await;
        assert_eq!(r.status, StatusCode::CREATED, "{}: {}", p.name, r.body);
        assert_eq!(r.json()["artifact"], p.output_name());
    }
    let list = call(&app, Method::GET, &format!("/sessions/{id}/artifacts"), None).await.json();
    assert_eq!(list.as_array().unwrap().len(), 8);

    let dot = call(&app, Method::GET, &format!("/sessions/{id}/artifacts/lattice?format=dot"), None).await;
    assert_eq!(dot.content_type, "text/vnd.graphviz");
    assert!(dot.body.starts_with("digraph"));

    let xml = call(&app, Method::GET, &format!("/sessions/{id}/artifacts/tracks?format=xml&payload=dot"), None).await;
    assert_eq!(xml.content_type, "application/xml");
    let env = parse_envelope(&xml.body).unwrap();
    assert_eq!((env.payload_format.as_str(), env.metadata["artifact"].as_str()), ("dot", "tracks"));

    let replay = call(&app, Method::POST, &format!("/sessions/{id}/replay"), None).await.json();
    assert_eq!(replay["index_identical"], true);
    assert!(replay["entries"].as_array().unwrap().iter().all(|e| e["identical"] == true));

    let links = call(&app, Method::GET, &format!("/sessions/{id}/links"), None).await.json();
    assert!(links["failures"].as_array().unwrap().is_empty());
    assert!(links["checked"].as_u64().unwrap() > 0);

    let audit = call(&app, Method::GET, &format!("/sessions/{id}/audit"), None).await.json();
    assert_eq!(audit.as_array().unwrap().len(), 8);
}

#[tokio::test]
async fn labels_resolve_to_documents() {
    let app = app();
    let id = session(&app, "police").await;
    let body = json!({"name": "s", "phase": "start_investigation", "parameters": {"object_cluster": "per_suspect"}});
    call(&app, Method::POST, &format!("/sessions/{id}/phases"), Some(body.to_string())).await;
    let ctx = call(&app, Method::GET, &format!("/sessions/{id}/artifacts/context"), None).await.json();
    for obj in ctx["objects"].as_array().unwrap() {
        let url = obj["url"].as_str().unwrap();
        let r = call(&app, Method::GET, &format!("/sessions/{id}/resolve?url={url}"), None).await;
        assert_eq!(r.status, StatusCode::OK, "{}", r.body);
        let href = r.json()["href"].as_str().unwrap().to_string();
        let doc = call(&app, Method::GET, &href, None).await;
        assert_eq!(doc.status, StatusCode::OK);
        assert_eq!(doc.json()["id"], obj["id"]);
        for m in doc.json()["members"].as_array().unwrap() {
            let member = call(&app, Method::GET, m["href"].as_str().unwrap(), None).await;
            assert_eq!(member.status, StatusCode::OK);
        }
    }
    let xml = call(&app, Method::GET, &format!("/sessions/{id}/documents/R01?format=xml"), None).await;
    assert!(parse_envelope(&xml.body).unwrap().payload.contains("R01"));
}

#[tokio::test]
async fn profiles_crud_and_master_mode() {
    let app = app();
    let id = session(&app, "survey").await;
    let p = json!({"name": "start", "phase": "start_investigation", "parameters": {"attributes": ["KD", "IR"]}});
    let put = call(&app, Method::PUT, &format!("/sessions/{id}/profiles/start"), Some(p.to_string())).await;
    assert_eq!(put.status, StatusCode::OK, "{}", put.body);
    assert_eq!(put.json()["hash"].as_str().unwrap().len(), 64);
    let mismatched = call(&app, Method::PUT, &format!("/sessions/{id}/profiles/other"), Some(p.to_string())).await;
    assert_eq!(mismatched.status, StatusCode::BAD_REQUEST);

    let list = call(&app, Method::GET, &format!("/sessions/{id}/profiles"), None).await.json();
    assert_eq!(list[0]["name"], "start");
    let got = call(&app, Method::GET, &format!("/sessions/{id}/profiles/start"), None).await.json();
    // Stored in canonical form, with defaults spelled out.
    assert_eq!(profile(got.clone()), profile(p.clone()));
    assert_eq!(got["parameters"]["clarify"], false);

    let run = call(&app, Method::POST, &format!("/sessions/{id}/phases"), Some(r#"{"profile":"start"}"#.into())).await;
    assert_eq!(run.status, StatusCode::CREATED, "{}", run.body);
    let cxt = call(&app, Method::GET, &format!("/sessions/{id}/artifacts/context?format=cxt"), None).await;
    assert!(cxt.body.starts_with("B\n"));

    let del = call(&app, Method::DELETE, &format!("/sessions/{id}/profiles/start"), None).await;
    assert_eq!(del.status, StatusCode::OK);
    let gone = call(&app, Method::GET, &format!("/sessions/{id}/profiles/start"), None).await;
    assert_eq!(gone.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn errors_map_to_status_codes() {
    let app = app();
    assert_eq!(call(&app, Method::GET, "/sessions/nope", None).await.status, StatusCode::NOT_FOUND);
    let bad = call(&app, Method::POST, "/sessions", Some("{}".into())).await;
    assert_eq!(bad.status, StatusCode::BAD_REQUEST);
    assert_eq!(bad.json()["kind"], "bad_request");
    let broken = call(&app, Method::POST, "/sessions", Some(json!({"corpus": "<corpus", "ontology": "<ontology/>"}).to_string())).await;
    assert_eq!(broken.status, StatusCode::BAD_REQUEST);

    let id = session(&app, "survey").await;
    let compose = json!({"name": "f", "phase": "compose_artifact", "parameters": {"output": "l", "kind": "fca"}});
    let r = call(&app, Method::POST, &format!("/sessions/{id}/phases"), Some(compose.to_string())).await;
    assert_eq!(r.status, StatusCode::CONFLICT);
    assert_eq!(r.json()["kind"], "conflict");
    let r = call(&app, Method::POST, &format!("/sessions/{id}/phases"), Some(r#"{"phase":"nope"}"#.into())).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    let r = call(&app, Method::GET, &format!("/sessions/{id}/artifacts/missing"), None).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
    let r = call(&app, Method::GET, &format!("/sessions/{id}/resolve"), None).await;
    assert_eq!(r.status, StatusCode::BAD_REQUEST);
    let r = call(&app, Method::GET, &format!("/sessions/{id}/resolve?url=https://nowhere"), None).await;
    assert_eq!(r.status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn sessions_persist_in_the_data_directory() {
    let dir = tempfile::tempdir().unwrap();
    let id = {
        let app = router(Arc::new(Workbench::with_data_dir(dir.path()).unwrap()));
        let id = session(&app, "survey").await;
        let p = json!({"name": "s", "phase": "start_investigation", "parameters": {}});
        call(&app, Method::POST, &format!("/sessions/{id}/phases"), Some(p.to_string())).await;
        id
    };
    let app = router(Arc::new(Workbench::with_data_dir(dir.path()).unwrap()));
    let ids = call(&app, Method::GET, "/sessions", None).await.json();
    assert_eq!(ids, json!([id]));
    let summary = call(&app, Method::GET, &format!("/sessions/{id}"), None).await.json();
    assert_eq!(summary["documents"], 6);
    assert_eq!(summary["artifacts"].as_array().unwrap().len(), 1);
}
