//! HTTP service: `POST /route`, `GET /healthz`, `GET /registry`.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use agentgate::pipeline::PipelineError;
use agentgate::{Registry, RouteTrace, Router, RoutingOutput, SafeguardConfig};
use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use serde::Deserialize;
use serde_json::json;

use crate::request::{build_input, RouteRequest};

/// Immutable after startup; shared by every request.
pub struct AppState {
    pub router: Router,
    pub registry: Registry,
    pub k: usize,
    pub safeguards: SafeguardConfig,
    next_id: AtomicU64,
}

impl AppState {
    pub fn new(router: Router, registry: Registry, k: usize, safeguards: SafeguardConfig) -> Self {
        Self { router, registry, k, safeguards, next_id: AtomicU64::new(1) }
    }
}

#[derive(Debug, Default, Deserialize)]
struct RouteParams {
    #[serde(default)]
    trace: Option<String>,
}

pub fn app(state: Arc<AppState>) -> axum::Router {
    axum::Router::new()
        .route("/route", post(route))
        .route("/healthz", get(healthz))
        .route("/registry", get(registry))
        .with_state(state)
}

fn json_body(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn error(status: StatusCode, code: &str, detail: impl std::fmt::Display) -> Response {
    json_body(status, json!({ "error": code, "detail": detail.to_string() }).to_string())
}

/// Canonical output, with the trace appended as a last key when asked for.
pub fn render_response(output: &RoutingOutput, trace: Option<&RouteTrace>) -> String {
    let canonical = output.to_canonical_json();
    match trace {
        None => canonical,
        Some(t) => {
            let trace = serde_json::to_string(t).expect("trace serializes");
            format!("{},\"trace\":{trace}}}", &canonical[..canonical.len() - 1])
        }
    }
}

async fn route(State(state): State<Arc<AppState>>, Query(params): Query<RouteParams>, body: Bytes) -> Response {
    let want_trace = matches!(params.trace.as_deref(), Some("1" | "true"));
    let req: RouteRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error(StatusCode::BAD_REQUEST, "invalid_request", e),
    };
    let input = match build_input(&state.registry, state.k, &state.safeguards, req) {
        Ok(i) => i,
        Err(e) => return error(StatusCode::BAD_REQUEST, e.code(), &e),
    };
    let id = state.next_id.fetch_add(1, Ordering::Relaxed);
    let worker = state.clone();
    // Remote deciders block on network IO.
    let result = tokio::task::spawn_blocking(move || worker.router.route(&input)).await;
    match result {
        Ok(Ok((output, trace))) => {
            let last = trace.attempts.last();
            tracing::info!(
                request_id = id,
                action = %output.action,
                backend = %output.backend_used,
                gamma_act = last.map(|a| a.gamma_act),
                gamma_str = last.and_then(|a| a.gamma_str),
                gamma_eff = output.confidence_effective,
                attempts = trace.attempts.len(),
                "routed"
            );
            json_body(StatusCode::OK, render_response(&output, want_trace.then_some(&trace)))
        }
        Ok(Err(e)) => {
            tracing::warn!(request_id = id, error = %e, "route failed");
            match e {
                PipelineError::InvalidInput(_) => error(StatusCode::BAD_REQUEST, "empty_query", e),
                PipelineError::BackendUnavailable(_) => {
                    error(StatusCode::SERVICE_UNAVAILABLE, "backend_unavailable", e)
                }
                _ => error(StatusCode::INTERNAL_SERVER_ERROR, "routing_failed", e),
            }
        }
        Err(join) => error(StatusCode::INTERNAL_SERVER_ERROR, "internal", join),
    }
}

async fn healthz() -> Response {
    json_body(StatusCode::OK, json!({ "status": "ok" }).to_string())
}

async fn registry(State(state): State<Arc<AppState>>) -> Response {
    let agents = serde_json::to_string(state.registry.agents()).expect("cards serialize");
    json_body(StatusCode::OK, agents)
}

/// Serves until Ctrl-C; in-flight requests are allowed to finish.
pub async fn serve(state: Arc<AppState>, listen: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(listen).await?;
    tracing::info!(addr = %listener.local_addr()?, agents = state.registry.len(), "listening");
    axum::serve(listener, app(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
            tracing::info!("shutting down");
        })
        .await
}
