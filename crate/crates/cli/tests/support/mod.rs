//! Fixtures shared by the integration tests and the acceptance run.

#![allow(dead_code)]

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use agentgate::benchgen::{self, GenSpec};
use agentgate::deciders::{ChatRequest, FnTransport, RemoteConfig, RemoteDecider, TransportError};
use agentgate::eval::BenchInstance;
use agentgate::{
    AgentCard, Decider, PipelineConfig, Registry, RetrieveRankDecider, Router, RoutingInput, RuleBasedDecider,
    SafeguardConfig,
};
use agentgate_cli::AppState;
use serde_json::{json, Value};

#[path = "../../../core/tests/common/oracle.rs"]
pub mod oracle;

pub fn bench42() -> Vec<BenchInstance> {
    benchgen::generate_benchmark(&GenSpec::with_seed(42)).expect("default spec is valid")
}

pub fn rule() -> Arc<dyn Decider> {
    Arc::new(RuleBasedDecider::new(SafeguardConfig::default()))
}

pub fn rank() -> Arc<dyn Decider> {
    Arc::new(RetrieveRankDecider::new(SafeguardConfig::default()))
}

pub fn router(edge: Arc<dyn Decider>) -> Router {
    Router::new(PipelineConfig::new(edge, SafeguardConfig::default())).unwrap()
}

/// A remote decider whose "model" is the retrieve-rank backend, answering
/// over the chat protocol in-process. `calls` counts transport requests.
pub fn mock_cloud(calls: Arc<AtomicUsize>) -> Arc<dyn Decider> {
    let inner = RetrieveRankDecider::new(SafeguardConfig::default());
    let transport = FnTransport(move |req: &ChatRequest| -> Result<String, TransportError> {
        calls.fetch_add(1, Ordering::SeqCst);
        let user: Value = serde_json::from_str(&req.messages[1].content)
            .map_err(|e| TransportError::Malformed(e.to_string()))?;
        let input = RoutingInput {
            query: user["query"].as_str().unwrap_or_default().to_string(),
            candidates: serde_json::from_value::<Vec<AgentCard>>(user["candidates"].clone())
                .map_err(|e| TransportError::Malformed(e.to_string()))?,
            context: user["context"].as_str().map(str::to_string),
        };
        let reply = match user.get("action") {
            None => {
                let d = inner.decide_action(&input).map_err(|e| TransportError::Request(e.to_string()))?;
                json!({ "action": d.action, "rationale": d.rationale, "confidence": d.confidence })
            }
            Some(a) => {
                let action = serde_json::from_value(a.clone()).map_err(|e| TransportError::Malformed(e.to_string()))?;
                match inner.ground_structure(&input, action) {
                    Ok(g) => json!({ "target": g.target, "args": g.args, "plan": g.plan, "confidence": g.confidence }),
                    // The model "answers" with something unusable.
                    Err(_) => json!({ "confidence": 0.0 }),
                }
            }
        };
        Ok(reply.to_string())
    });
    Arc::new(RemoteDecider::new(RemoteConfig::new("mock://cloud", "mock"), Box::new(transport)))
}

pub fn demo_state() -> Arc<AppState> {
    let registry = Registry::from_cards(benchgen::all_agent_cards()).unwrap();
    Arc::new(AppState::new(router(rule()), registry, 5, SafeguardConfig::default()))
}

/// `POST /route` body for a benchmark instance, candidates by name.
pub fn route_body(inst: &BenchInstance) -> String {
    let names: Vec<&str> = inst.input.candidates.iter().map(|c| c.name.as_str()).collect();
    json!({ "query": inst.input.query, "context": inst.input.context, "candidates": names }).to_string()
}
