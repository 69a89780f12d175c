use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{require_executable, ActionDecision, Decider, DeciderError, GroundingResult};
use crate::registry::AgentCard;
use crate::routing::{
    parse_routing_output, ArgumentSet, Backend, Plan, PlanStep, RoutingAction, RoutingInput,
    RoutingOutput,
};

pub const REMOTE_KEY_ENV: &str = "AGENTGATE_REMOTE_KEY";
pub const DEFAULT_TIMEOUT_SECS: u64 = 30;
pub const DEFAULT_REMOTE_CONFIDENCE: f64 = 0.75;

pub const DEFAULT_ACTION_TEMPLATE: &str = "You route user requests inside an agent network. \
Given the query, the optional context and the candidate agents in the user message, choose exactly \
one action from CALL_AGENT, MULTI_AGENT_PLAN, DIRECT_ANSWER, ESCALATE. Reply with a JSON object \
{\"action\": str, \"rationale\": str, \"confidence\": number in [0,1]} and nothing else.";

pub const DEFAULT_STRUCTURE_TEMPLATE: &str = "You ground a routing decision into executable \
structure. Use only the candidate agents listed in the user message and only their schema fields. \
For CALL_AGENT reply {\"target\": str, \"args\": object, \"confidence\": number}; for \
MULTI_AGENT_PLAN reply {\"plan\": [{\"agent\": str, \"args\": object}], \"confidence\": number}. \
Reply with JSON only.";

pub const DEFAULT_ONE_SHOT_TEMPLATE: &str = "You are a tool-calling assistant. Emit a single \
JSON routing object {\"action\", \"target\", \"args\", \"plan\", \"rationale\", \
\"confidence_action\", \"confidence_structure\", \"confidence_effective\", \"backend_used\"} for \
the user message. Reply with JSON only.";

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum TransportError {
    #[error("request failed: {0}")]
    Request(String),
    #[error("timed out")]
    Timeout,
    #[error("malformed reply: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: "system".into(), content: content.into() }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: "user".into(), content: content.into() }
    }
}

/// Chat-completions request body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub temperature: f64,
}

/// Sends one chat request and returns the reply message content.
pub trait ChatTransport: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError>;
}

/// Adapts a closure into a transport. Mostly for in-process mocks.
pub struct FnTransport<F>(pub F);

impl<F> ChatTransport for FnTransport<F>
where
    F: Fn(&ChatRequest) -> Result<String, TransportError> + Send + Sync,
{
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        (self.0)(request)
    }
}

/// Blocking HTTP transport for an OpenAI-style `/chat/completions` endpoint.
/// Sends `Authorization: Bearer $AGENTGATE_REMOTE_KEY` when the variable is set.
pub struct HttpTransport {
    endpoint: String,
    agent: ureq::Agent,
    api_key: Option<String>,
}

impl HttpTransport {
    pub fn new(endpoint: impl Into<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        Self {
            endpoint: endpoint.into(),
            agent,
            api_key: std::env::var(REMOTE_KEY_ENV).ok().filter(|k| !k.is_empty()),
        }
    }
}

impl ChatTransport for HttpTransport {
    fn complete(&self, request: &ChatRequest) -> Result<String, TransportError> {
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", format!("Bearer {key}"));
        }
        let mut resp = req.send_json(request).map_err(|e| match e {
            ureq::Error::Timeout(_) => TransportError::Timeout,
            other => TransportError::Request(other.to_string()),
        })?;
        let body: Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| TransportError::Malformed(e.to_string()))?;
        body.pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| TransportError::Malformed("missing choices[0].message.content".into()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteConfig {
    pub endpoint: String,
    pub model: String,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_action_template")]
    pub action_template: String,
    #[serde(default = "default_structure_template")]
    pub structure_template: String,
    #[serde(default = "default_one_shot_template")]
    pub one_shot_template: String,
    #[serde(default = "default_confidence")]
    pub default_confidence: f64,
}

fn default_timeout() -> u64 {
    DEFAULT_TIMEOUT_SECS
}
fn default_action_template() -> String {
    DEFAULT_ACTION_TEMPLATE.into()
}
fn default_structure_template() -> String {
    DEFAULT_STRUCTURE_TEMPLATE.into()
}
fn default_one_shot_template() -> String {
    DEFAULT_ONE_SHOT_TEMPLATE.into()
}
fn default_confidence() -> f64 {
    DEFAULT_REMOTE_CONFIDENCE
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            timeout_secs: DEFAULT_TIMEOUT_SECS,
            action_template: default_action_template(),
            structure_template: default_structure_template(),
            one_shot_template: default_one_shot_template(),
            default_confidence: DEFAULT_REMOTE_CONFIDENCE,
        }
    }
}

#[derive(Deserialize)]
struct ActionReply {
    action: String,
    #[serde(default)]
    rationale: Option<String>,
    #[serde(default)]
    confidence: Option<f64>,
}

#[derive(Deserialize)]
struct StructureReply {
    #[serde(default)]
    target: Option<String>,
    #[serde(default)]
    args: Option<ArgumentSet>,
    #[serde(default)]
    plan: Option<Vec<PlanStep>>,
    #[serde(default)]
    confidence: Option<f64>,
}

/// Strips a surrounding markdown code fence, if any.
fn unfence(reply: &str) -> &str {
    let t = reply.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let rest = rest.trim_start_matches(|c: char| c.is_ascii_alphabetic());
    rest.strip_suffix("```").unwrap_or(rest).trim()
}

fn schema_filtered(card: &AgentCard, args: Option<ArgumentSet>) -> ArgumentSet {
    let mut args = args.unwrap_or_default();
    args.retain(|k, _| card.schema.contains(k));
    args
}

/// Decider backed by a chat-completions model.
pub struct RemoteDecider {
    config: RemoteConfig,
    transport: Box<dyn ChatTransport>,
}

impl RemoteDecider {
    pub fn new(config: RemoteConfig, transport: Box<dyn ChatTransport>) -> Self {
        Self { config, transport }
    }

    pub fn http(config: RemoteConfig) -> Result<Self, DeciderError> {
        if config.endpoint.trim().is_empty() {
            return Err(DeciderError::InvalidConfig("remote endpoint is empty".into()));
        }
        if config.timeout_secs == 0 {
            return Err(DeciderError::InvalidConfig("remote timeout must be positive".into()));
        }
        let transport = HttpTransport::new(&config.endpoint, Duration::from_secs(config.timeout_secs));
        Ok(Self::new(config, Box::new(transport)))
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.config
    }

    fn payload(input: &RoutingInput, action: Option<RoutingAction>) -> String {
        let mut body = json!({
            "query": input.query,
            "context": input.context,
            "candidates": input.candidates,
        });
        if let Some(a) = action {
            body["action"] = json!(a);
        }
        body.to_string()
    }

    fn call(&self, template: &str, user: String) -> Result<String, DeciderError> {
        let request = ChatRequest {
            model: self.config.model.clone(),
            messages: vec![ChatMessage::system(template), ChatMessage::user(user)],
            temperature: 0.0,
        };
        self.transport
            .complete(&request)
            .map_err(|e| DeciderError::BackendUnavailable(e.to_string()))
    }

    fn confidence(&self, raw: &str, value: Option<f64>) -> Result<f64, DeciderError> {
        let c = value.unwrap_or(self.config.default_confidence);
        if c.is_finite() && (0.0..=1.0).contains(&c) {
            Ok(c)
        } else {
            Err(DeciderError::stage_failure(raw, format!("confidence {c} outside [0, 1]")))
        }
    }

    /// Tool-calling baseline: one request, no stage split, no safeguards.
    /// Unusable replies degrade to a zero-confidence direct answer.
    pub fn one_shot_route(&self, input: &RoutingInput) -> Result<RoutingOutput, DeciderError> {
        let raw = self.call(&self.config.one_shot_template, Self::payload(input, None))?;
        let degraded = |reason: String| {
            RoutingOutput::terminal(
                RoutingAction::DirectAnswer,
                Some(format!("unusable reply: {reason}")),
                0.0,
                Backend::Cloud,
            )
        };
        match parse_routing_output(&raw) {
            Ok(mut out) => {
                if let Some(ghost) = out.referenced_agents().into_iter().find(|n| !input.has_candidate(n)) {
                    return Ok(degraded(format!("agent `{ghost}` is not a candidate")));
                }
                out.backend_used = Backend::Cloud;
                Ok(out)
            }
            Err(f) => Ok(degraded(f.reason)),
        }
    }
}

impl Decider for RemoteDecider {
    fn name(&self) -> &str {
        "remote"
    }

    fn decide_action(&self, input: &RoutingInput) -> Result<ActionDecision, DeciderError> {
        let raw = self.call(&self.config.action_template, Self::payload(input, None))?;
        let reply: ActionReply = serde_json::from_str(unfence(&raw))
            .map_err(|e| DeciderError::stage_failure(&raw, e.to_string()))?;
        let action = RoutingAction::parse(reply.action.trim())
            .ok_or_else(|| DeciderError::stage_failure(&raw, format!("unknown action `{}`", reply.action)))?;
        let confidence = self.confidence(&raw, reply.confidence)?;
        Ok(ActionDecision { action, rationale: reply.rationale, confidence, raw })
    }

    fn ground_structure(
        &self,
        input: &RoutingInput,
        action: RoutingAction,
    ) -> Result<GroundingResult, DeciderError> {
        require_executable(action)?;
        let raw = self.call(&self.config.structure_template, Self::payload(input, Some(action)))?;
        let reply: StructureReply = serde_json::from_str(unfence(&raw))
            .map_err(|e| DeciderError::stage_failure(&raw, e.to_string()))?;
        let confidence = self.confidence(&raw, reply.confidence)?;
        let fail = |reason: String| DeciderError::stage_failure(&raw, reason);
        match action {
            RoutingAction::CallAgent => {
                let target = reply.target.ok_or_else(|| fail("reply has no target".into()))?;
                let card = input
                    .candidate(&target)
                    .ok_or_else(|| fail(format!("target `{target}` is not a candidate")))?;
                let args = schema_filtered(card, reply.args);
                Ok(GroundingResult { target: Some(target), args: Some(args), plan: None, confidence, raw })
            }
            _ => {
                let steps = reply.plan.ok_or_else(|| fail("reply has no plan".into()))?;
                let mut grounded = Vec::with_capacity(steps.len());
                for step in steps {
                    let card = input.candidate(&step.agent_name).ok_or_else(|| {
                        fail(format!("plan agent `{}` is not a candidate", step.agent_name))
                    })?;
                    grounded.push(PlanStep::new(step.agent_name.clone(), schema_filtered(card, Some(step.args))));
                }
                let plan = Plan::new(grounded);
                if !plan.has_valid_length() {
                    return Err(fail(format!("plan has {} steps", plan.len())));
                }
                Ok(GroundingResult { target: None, args: None, plan: Some(plan), confidence, raw })
            }
        }
    }
}
