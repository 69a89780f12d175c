//! Stage I (action decision) and Stage II (structural grounding) backends.
//!
//! Two deterministic backends ship with the crate, a rule-based one and a
//! retrieve-rank one, plus a client for a remote chat-completions model.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::fallback::SafeguardConfig;
use crate::routing::{ArgumentSet, Plan, RoutingAction, RoutingInput};

mod rank;
mod remote;
mod rule;

pub use rank::RetrieveRankDecider;
pub use remote::{
    ChatMessage, ChatRequest, ChatTransport, FnTransport, HttpTransport, RemoteConfig,
    RemoteDecider, TransportError, DEFAULT_ACTION_TEMPLATE, DEFAULT_ONE_SHOT_TEMPLATE,
    DEFAULT_REMOTE_CONFIDENCE, DEFAULT_STRUCTURE_TEMPLATE, DEFAULT_TIMEOUT_SECS,
    REMOTE_KEY_ENV,
};
pub use rule::RuleBasedDecider;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum DeciderError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("stage failure: {reason}")]
    StageFailure { raw: String, reason: String },
    #[error("grounding called with non-executable action {0}")]
    PreconditionViolation(RoutingAction),
    #[error("invalid decider config: {0}")]
    InvalidConfig(String),
}

impl DeciderError {
    pub fn stage_failure(raw: impl Into<String>, reason: impl Into<String>) -> Self {
        DeciderError::StageFailure { raw: raw.into(), reason: reason.into() }
    }
}

/// Stage I result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionDecision {
    pub action: RoutingAction,
    pub rationale: Option<String>,
    pub confidence: f64,
    pub raw: String,
}

impl ActionDecision {
    /// Builds a decision whose raw text is the Stage I wire fragment.
    pub fn new(action: RoutingAction, rationale: impl Into<String>, confidence: f64) -> Self {
        let rationale = rationale.into();
        let raw = json!({ "action": action, "rationale": rationale, "confidence": confidence })
            .to_string();
        Self { action, rationale: Some(rationale), confidence, raw }
    }
}

/// Stage II result. Exactly one of `target` and `plan` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundingResult {
    pub target: Option<String>,
    pub args: Option<ArgumentSet>,
    pub plan: Option<Plan>,
    pub confidence: f64,
    pub raw: String,
}

impl GroundingResult {
    pub fn call(target: impl Into<String>, args: ArgumentSet, confidence: f64) -> Self {
        let target = target.into();
        let raw = json!({ "target": target, "args": args, "confidence": confidence }).to_string();
        Self { target: Some(target), args: Some(args), plan: None, confidence, raw }
    }

    pub fn plan(plan: Plan, confidence: f64) -> Self {
        let raw = json!({ "plan": plan, "confidence": confidence }).to_string();
        Self { target: None, args: None, plan: Some(plan), confidence, raw }
    }
}

/// A routing backend. Implementations must be safe to call concurrently.
pub trait Decider: Send + Sync {
    fn name(&self) -> &str;

    fn decide_action(&self, input: &RoutingInput) -> Result<ActionDecision, DeciderError>;

    /// Grounds an executable action. Non-executable actions yield
    /// [`DeciderError::PreconditionViolation`].
    fn ground_structure(
        &self,
        input: &RoutingInput,
        action: RoutingAction,
    ) -> Result<GroundingResult, DeciderError>;
}

pub(crate) fn require_executable(action: RoutingAction) -> Result<(), DeciderError> {
    if action.is_executable() {
        Ok(())
    } else {
        Err(DeciderError::PreconditionViolation(action))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeciderKind {
    RuleBased,
    RetrieveRank,
    Remote,
}

impl std::str::FromStr for DeciderKind {
    type Err = DeciderError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rule" | "rule_based" => Ok(DeciderKind::RuleBased),
            "rank" | "retrieve_rank" => Ok(DeciderKind::RetrieveRank),
            "remote" => Ok(DeciderKind::Remote),
            other => Err(DeciderError::InvalidConfig(format!("unknown backend `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeciderConfig {
    pub kind: DeciderKind,
    #[serde(default)]
    pub remote: Option<RemoteConfig>,
}

impl DeciderConfig {
    pub fn rule_based() -> Self {
        Self { kind: DeciderKind::RuleBased, remote: None }
    }

    pub fn retrieve_rank() -> Self {
        Self { kind: DeciderKind::RetrieveRank, remote: None }
    }

    pub fn remote(config: RemoteConfig) -> Self {
        Self { kind: DeciderKind::Remote, remote: Some(config) }
    }

    /// Instantiates the backend. Remote backends get an HTTP transport.
    pub fn build(&self, safeguards: &SafeguardConfig) -> Result<Arc<dyn Decider>, DeciderError> {
        Ok(match self.kind {
            DeciderKind::RuleBased => Arc::new(RuleBasedDecider::new(safeguards.clone())),
            DeciderKind::RetrieveRank => Arc::new(RetrieveRankDecider::new(safeguards.clone())),
            DeciderKind::Remote => {
                let cfg = self.remote.clone().ok_or_else(|| {
                    DeciderError::InvalidConfig("remote backend needs endpoint settings".into())
                })?;
                Arc::new(RemoteDecider::http(cfg)?)
            }
        })
    }
}
