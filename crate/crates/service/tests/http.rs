use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use netlingua::app::{router, AppState};
use netlingua::config::BackendSource;
use netlingua_core::agent::{AgentConfig, MockBackend, MockScript};
use netlingua_core::fixtures;
use netlingua_core::memory::MemoryStore;
use serde_json::{json, Value};
use tower::ServiceExt;

fn source(script: MockScript) -> BackendSource {
    Box::new(move || Arc::new(MockBackend::new(script.clone()).unwrap()))
}

fn state(script: MockScript) -> AppState {
    AppState::new(
        fixtures::schema(),
        fixtures::schema_modules().unwrap(),
        fixtures::clos_state(),
        MemoryStore::offline(),
        AgentConfig::default(),
        source(script),
    )
}

fn walkthrough_app() -> (Arc<AppState>, Router) {
    let app = Arc::new(state(fixtures::walkthrough().script));
    (app.clone(), router(app))
}

async fn call(r: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header(header::CONTENT_TYPE, "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = r.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()));
    (status, v)
}

fn actions(view: &Value) -> Vec<String> {
    view["transcript"].as_array().unwrap().iter().map(|t| t["action"].as_str().unwrap().to_string()).collect()
}

#[tokio::test]
async fn walkthrough_over_http() {
    let (app, r) = walkthrough_app();
    let (s, v) = call(&r, Method::POST, "/sessions", Some(json!({"query": fixtures::CONNECT_ETHERNET4_QUERY}))).await;
    assert_eq!(s, StatusCode::CREATED);
    assert_eq!(v["phase"], "clarifying");
    assert_eq!(v["awaiting_input"], true);
    assert!(v["pending_question"].as_str().unwrap().len() > 10);
    let id = v["session_id"].as_str().unwrap().to_string();
    let first_plan = v["pending_question"].clone();

    let uri = format!("/sessions/{id}/reply");
    let (s, v) = call(&r, Method::POST, &uri, Some(json!({"kind": "text", "text": "I prefer you use 10.1.1.0/30 subnet instead."}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["phase"], "clarifying");
    assert_ne!(v["pending_question"], first_plan);
    assert!(v["pending_question"].as_str().unwrap().contains("10.1.1."));

    let (s, v) = call(&r, Method::POST, &uri, Some(json!({"kind": "confirm"}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["phase"], "awaiting-confirmation");
    let proposal = &v["proposed_change_set"];
    assert_eq!(proposal["change_set"].as_array().unwrap().len(), 4);
    assert_eq!(proposal["diff"].as_array().unwrap().len(), 8);
    assert!(v["report"]["status"] == "pass");

    let (s, v) = call(&r, Method::POST, &uri, Some(json!({"kind": "confirm"}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["phase"], "done");
    assert_eq!(v["awaiting_input"], false);
    assert_eq!(actions(&v).last().unwrap(), "Deploy");
    assert_eq!(app.state.read().unwrap().revision, 1);

    let (s, v) = call(&r, Method::POST, &uri, Some(json!({"kind": "confirm"}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    assert!(v["error"].as_str().unwrap().contains("done"));

    let (s, v) = call(&r, Method::GET, "/sessions", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v[0]["session_id"], id.as_str());
    assert_eq!(v[0]["turns"], 17);
}

#[tokio::test]
async fn recorded_actions_match_the_fixture_transcript() {
    let (_, r) = walkthrough_app();
    let (_, v) = call(&r, Method::POST, "/sessions", Some(json!({"query": fixtures::CONNECT_ETHERNET4_QUERY}))).await;
    let id = v["session_id"].as_str().unwrap().to_string();
    let uri = format!("/sessions/{id}/reply");
    for reply in fixtures::walkthrough().replies {
        let (s, _) = call(&r, Method::POST, &uri, Some(serde_json::to_value(reply).unwrap())).await;
        assert_eq!(s, StatusCode::OK);
    }
    let (s, v) = call(&r, Method::GET, &format!("/sessions/{id}/transcript"), None).await;
    assert_eq!(s, StatusCode::OK);
    let got: Vec<Value> = v.as_str().unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let want: Vec<Value> = fixtures::WALKTHROUGH_TRANSCRIPT.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(got.len(), want.len());
    for (g, w) in got.iter().zip(&want) {
        assert_eq!(g["action"], w["action"]);
        assert_eq!(g["phase"], w["phase"]);
    }
}

#[tokio::test]
async fn repeated_reads_are_identical() {
    let (_, r) = walkthrough_app();
    let (_, v) = call(&r, Method::POST, "/sessions", Some(json!({"query": fixtures::CONNECT_ETHERNET4_QUERY}))).await;
    let uri = format!("/sessions/{}", v["session_id"].as_str().unwrap());
    let (_, a) = call(&r, Method::GET, &uri, None).await;
    let (_, b) = call(&r, Method::GET, &uri, None).await;
    assert_eq!(a, b);
    assert_eq!(a, v);
}

#[tokio::test]
async fn request_errors() {
    let (_, r) = walkthrough_app();
    let (s, v) = call(&r, Method::POST, "/sessions", Some(json!({"query": "   "}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(v["error"].is_string());
    let (s, _) = call(&r, Method::POST, "/sessions", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&r, Method::GET, "/sessions/nope", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call(&r, Method::POST, "/sessions/nope/reply", Some(json!({"kind": "confirm"}))).await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let (_, v) = call(&r, Method::POST, "/sessions", Some(json!({"query": fixtures::CONNECT_ETHERNET4_QUERY}))).await;
    let id = v["session_id"].as_str().unwrap();
    let (s, _) = call(&r, Method::POST, &format!("/sessions/{id}/reply"), Some(json!({"kind": "shrug"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&r, Method::GET, "/health", None).await;
    assert_eq!(s, StatusCode::OK);
}

#[tokio::test]
async fn unreachable_backend_is_503() {
    let r = router(Arc::new(state(MockScript::default())));
    let (s, v) = call(&r, Method::POST, "/sessions", Some(json!({"query": fixtures::CONNECT_ETHERNET4_QUERY}))).await;
    assert_eq!(s, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(v["error"], "backend unavailable");
    assert!(!v["cause"].as_str().unwrap().is_empty());
    let (s, v) = call(&r, Method::GET, &format!("/sessions/{}", v["session_id"].as_str().unwrap()), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["phase"], "failed");
    assert!(v["failure"].is_string());
}

#[tokio::test]
async fn feedback_is_recorded_and_persisted() {
    let dir = tempfile::tempdir().unwrap();
    let app = Arc::new(state(fixtures::walkthrough().script).with_sessions_dir(dir.path().into()).unwrap());
    let r = router(app);
    let (_, v) = call(&r, Method::POST, "/sessions", Some(json!({"query": fixtures::CONNECT_ETHERNET4_QUERY}))).await;
    let id = v["session_id"].as_str().unwrap().to_string();
    let (s, v) = call(&r, Method::POST, &format!("/sessions/{id}/turns/3/feedback"), Some(json!({"rating": "up", "comment": "clear plan"}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["feedback"]["3"]["rating"], "up");
    let (s, _) = call(&r, Method::POST, &format!("/sessions/{id}/turns/0/feedback"), Some(json!({"rating": "down"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&r, Method::POST, &format!("/sessions/{id}/turns/99/feedback"), Some(json!({"rating": "down"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let saved = std::fs::read_to_string(dir.path().join(format!("{id}.feedback.jsonl"))).unwrap();
    assert_eq!(saved.lines().count(), 1);
}

#[tokio::test]
async fn restart_restores_sessions_read_only() {
    let dir = tempfile::tempdir().unwrap();
    let r = router(Arc::new(state(fixtures::walkthrough().script).with_sessions_dir(dir.path().into()).unwrap()));
    let (_, v) = call(&r, Method::POST, "/sessions", Some(json!({"query": fixtures::CONNECT_ETHERNET4_QUERY}))).await;
    let id = v["session_id"].as_str().unwrap().to_string();
    call(&r, Method::POST, &format!("/sessions/{id}/turns/3/feedback"), Some(json!({"rating": "down"}))).await;
    let (_, live) = call(&r, Method::GET, &format!("/sessions/{id}"), None).await;
    drop(r);

    let r = router(Arc::new(state(fixtures::walkthrough().script).with_sessions_dir(dir.path().into()).unwrap()));
    let (s, v) = call(&r, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["read_only"], true);
    assert_eq!(v["awaiting_input"], false);
    assert_eq!(v["transcript"], live["transcript"]);
    assert_eq!(v["feedback"], live["feedback"]);
    let (s, _) = call(&r, Method::POST, &format!("/sessions/{id}/reply"), Some(json!({"kind": "confirm"}))).await;
    assert_eq!(s, StatusCode::CONFLICT);
}

#[tokio::test]
async fn bearer_token_is_enforced() {
    let r = router(Arc::new(state(fixtures::walkthrough().script).with_token("s3cret")));
    let (s, v) = call(&r, Method::GET, "/sessions", None).await;
    assert_eq!(s, StatusCode::UNAUTHORIZED);
    assert!(v["error"].is_string());
    let (s, _) = call(&r, Method::GET, "/health", None).await;
    assert_eq!(s, StatusCode::OK);
    let (s, _) = call(&r, Method::GET, "/sessions?token=s3cret", None).await;
    assert_eq!(s, StatusCode::OK);
    let req = Request::get("/sessions").header(header::AUTHORIZATION, "Bearer s3cret").body(Body::empty()).unwrap();
    assert_eq!(r.clone().oneshot(req).await.unwrap().status(), StatusCode::OK);
    let req = Request::get("/sessions").header(header::AUTHORIZATION, "Bearer wrong").body(Body::empty()).unwrap();
    assert_eq!(r.clone().oneshot(req).await.unwrap().status(), StatusCode::UNAUTHORIZED);
}
