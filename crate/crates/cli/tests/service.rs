mod support;

use agentgate::parse_routing_output;
use axum::body::Body;
use axum::http::{Request, StatusCode};
use serde_json::Value;
use support::*;
use tower::ServiceExt;

async fn call(req: Request<Body>) -> (StatusCode, String) {
    let resp = agentgate_cli::app(demo_state()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

fn post(uri: &str, body: &str) -> Request<Body> {
    Request::post(uri).header("content-type", "application/json").body(Body::from(body.to_string())).unwrap()
}

#[tokio::test]
async fn healthz_reports_ok() {
    let (status, body) = call(Request::get("/healthz").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, r#"{"status":"ok"}"#);
}

#[tokio::test]
async fn registry_lists_agents() {
    let (status, body) = call(Request::get("/registry").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::OK);
    let agents: Vec<Value> = serde_json::from_str(&body).unwrap();
    assert_eq!(agents.len(), 20);
    assert_eq!(agents[0]["name"], "food_delivery");
}

#[tokio::test]
async fn routes_with_explicit_candidates() {
    let (status, body) = call(post(
        "/route",
        r#"{"query":"weather in Beijing tomorrow","context":null,"candidates":["weather_api","grocery_order"]}"#,
    ))
    .await;
    assert_eq!(status, StatusCode::OK);
    let out = parse_routing_output(&body).unwrap();
    assert_eq!(out.target.as_deref(), Some("weather_api"));
    assert_eq!(out.args.unwrap().get("city"), Some("Beijing"));
    assert!(body.starts_with(r#"{"action":"CALL_AGENT","target":"weather_api""#));
}

#[tokio::test]
async fn null_candidates_retrieve_from_registry() {
    let (status, body) = call(post("/route", r#"{"query":"book a flight to Paris","candidates":null}"#)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(parse_routing_output(&body).unwrap().target.as_deref(), Some("flight_booking"));
}

#[tokio::test]
async fn trace_is_appended_on_request() {
    let body = r#"{"query":"book a taxi to Rome"}"#;
    let (_, plain) = call(post("/route", body)).await;
    let (status, traced) = call(post("/route?trace=1", body)).await;
    assert_eq!(status, StatusCode::OK);
    let v: Value = serde_json::from_str(&traced).unwrap();
    assert_eq!(v["trace"]["attempts"].as_array().unwrap().len(), 1);
    assert!(traced.starts_with(&plain[..plain.len() - 1]));
    assert!(parse_routing_output(&plain).is_ok());
}

#[tokio::test]
async fn bad_requests_get_error_codes() {
    let cases = [
        (r#"{"query":"   "}"#, "empty_query"),
        (r#"{"query":"hi","candidates":["ghost_agent"]}"#, "unknown_candidate"),
        (r#"{"query":"hi","candidates":["calendar","calendar"]}"#, "duplicate_candidate"),
        (r#"{"query":"hi","extra":1}"#, "invalid_request"),
        (r#"not json"#, "invalid_request"),
    ];
    for (body, code) in cases {
        let (status, resp) = call(post("/route", body)).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
        let v: Value = serde_json::from_str(&resp).unwrap();
        assert_eq!(v["error"], code, "{body}");
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_requests_are_independent() {
    let state = demo_state();
    let bench = bench42();
    let sequential: Vec<String> = {
        let mut v = Vec::new();
        for inst in bench.iter().take(40) {
            let resp = agentgate_cli::app(state.clone()).oneshot(post("/route", &route_body(inst))).await.unwrap();
            v.push(String::from_utf8(axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap().to_vec()).unwrap());
        }
        v
    };
    let handles: Vec<_> = bench
        .iter()
        .take(40)
        .rev()
        .map(|inst| {
            let app = agentgate_cli::app(state.clone());
            let req = post("/route", &route_body(inst));
            tokio::spawn(async move {
                let resp = app.oneshot(req).await.unwrap();
                String::from_utf8(axum::body::to_bytes(resp.into_body(), usize::MAX).await.unwrap().to_vec()).unwrap()
            })
        })
        .collect();
    let mut concurrent = Vec::new();
    for h in handles {
        concurrent.push(h.await.unwrap());
    }
    concurrent.reverse();
    assert_eq!(sequential, concurrent);
}
