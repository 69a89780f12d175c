//! Turning a raw route request into a pipeline input.

use agentgate::{Registry, RoutingInput, SafeguardConfig};
use serde::Deserialize;

/// Body of `POST /route`. `candidates: null` means retrieve from the
/// registry.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RouteRequest {
    pub query: String,
    #[serde(default)]
    pub context: Option<String>,
    #[serde(default)]
    pub candidates: Option<Vec<String>>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RequestError {
    #[error("query must be non-empty")]
    EmptyQuery,
    #[error("unknown candidate agent `{0}`")]
    UnknownCandidate(String),
    #[error("duplicate candidate agent `{0}`")]
    DuplicateCandidate(String),
    #[error("candidate retrieval failed: {0}")]
    Retrieval(String),
}

impl RequestError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            RequestError::EmptyQuery => "empty_query",
            RequestError::UnknownCandidate(_) => "unknown_candidate",
            RequestError::DuplicateCandidate(_) => "duplicate_candidate",
            RequestError::Retrieval(_) => "retrieval_failed",
        }
    }
}

pub fn build_input(
    registry: &Registry,
    k: usize,
    safeguards: &SafeguardConfig,
    req: RouteRequest,
) -> Result<RoutingInput, RequestError> {
    if req.query.trim().is_empty() {
        return Err(RequestError::EmptyQuery);
    }
    let candidates = match req.candidates {
        Some(names) => {
            for (i, n) in names.iter().enumerate() {
                if names[..i].contains(n) {
                    return Err(RequestError::DuplicateCandidate(n.clone()));
                }
            }
            names
                .iter()
                .map(|n| registry.lookup(n).cloned().ok_or_else(|| RequestError::UnknownCandidate(n.clone())))
                .collect::<Result<Vec<_>, _>>()?
        }
        None => registry
            .retrieve_candidates(&req.query, k, safeguards)
            .map_err(|e| RequestError::Retrieval(e.to_string()))?,
    };
    Ok(RoutingInput { query: req.query, candidates, context: req.context })
}
