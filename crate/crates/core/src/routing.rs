//! Constrained action space, structured routing output and its executable
//! projection.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::registry::AgentCard;

pub const MAX_PLAN_LENGTH: usize = 8;
pub const MIN_PLAN_LENGTH: usize = 2;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum RoutingError {
    #[error("query must be non-empty")]
    EmptyQuery,
    #[error("invalid routing output: {0}")]
    InvalidOutput(String),
}

/// The four routing decisions. No other value is representable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RoutingAction {
    CallAgent,
    MultiAgentPlan,
    DirectAnswer,
    Escalate,
}

impl RoutingAction {
    pub const ALL: [RoutingAction; 4] = [
        RoutingAction::CallAgent,
        RoutingAction::MultiAgentPlan,
        RoutingAction::DirectAnswer,
        RoutingAction::Escalate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RoutingAction::CallAgent => "CALL_AGENT",
            RoutingAction::MultiAgentPlan => "MULTI_AGENT_PLAN",
            RoutingAction::DirectAnswer => "DIRECT_ANSWER",
            RoutingAction::Escalate => "ESCALATE",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.as_str() == s)
    }

    /// Actions that need structural grounding.
    pub fn is_executable(self) -> bool {
        matches!(self, RoutingAction::CallAgent | RoutingAction::MultiAgentPlan)
    }
}

impl fmt::Display for RoutingAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    #[default]
    Edge,
    Cloud,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::Edge => "edge",
            Backend::Cloud => "cloud",
        })
    }
}

/// Query, candidate subset and optional context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingInput {
    pub query: String,
    pub candidates: Vec<AgentCard>,
    #[serde(default)]
    pub context: Option<String>,
}

impl RoutingInput {
    pub fn new(
        query: impl Into<String>,
        candidates: Vec<AgentCard>,
        context: Option<String>,
    ) -> Result<Self, RoutingError> {
        let input = Self { query: query.into(), candidates, context };
        input.check()?;
        Ok(input)
    }

    pub fn check(&self) -> Result<(), RoutingError> {
        if self.query.trim().is_empty() {
            return Err(RoutingError::EmptyQuery);
        }
        Ok(())
    }

    pub fn candidate(&self, name: &str) -> Option<&AgentCard> {
        self.candidates.iter().find(|c| c.name == name)
    }

    pub fn has_candidate(&self, name: &str) -> bool {
        self.candidate(name).is_some()
    }
}

/// Field name to trimmed string value. Keys are kept sorted so the wire form
/// is canonical.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct ArgumentSet(BTreeMap<String, String>);

impl ArgumentSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, key: impl Into<String>, value: impl AsRef<str>) -> Option<String> {
        self.0.insert(key.into(), value.as_ref().trim().to_string())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    pub fn contains_key(&self, key: &str) -> bool {
        self.0.contains_key(key)
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        self.0.remove(key)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn retain(&mut self, mut keep: impl FnMut(&str, &str) -> bool) {
        self.0.retain(|k, v| keep(k, v));
    }
}

impl<K: Into<String>, V: AsRef<str>> FromIterator<(K, V)> for ArgumentSet {
    fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
        let mut set = ArgumentSet::new();
        for (k, v) in iter {
            set.insert(k, v);
        }
        set
    }
}

impl<'de> Deserialize<'de> for ArgumentSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let raw = BTreeMap::<String, serde_json::Value>::deserialize(d)?;
        let mut set = ArgumentSet::new();
        for (k, v) in raw {
            let s = match v {
                serde_json::Value::String(s) => s,
                serde_json::Value::Number(n) => n.to_string(),
                serde_json::Value::Bool(b) => b.to_string(),
                other => {
                    return Err(D::Error::custom(format!(
                        "argument `{k}` must be a scalar, got {other}"
                    )))
                }
            };
            set.insert(k, s);
        }
        Ok(set)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanStep {
    #[serde(rename = "agent")]
    pub agent_name: String,
    #[serde(default)]
    pub args: ArgumentSet,
}

impl PlanStep {
    pub fn new(agent_name: impl Into<String>, args: ArgumentSet) -> Self {
        Self { agent_name: agent_name.into(), args }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Plan {
    pub steps: Vec<PlanStep>,
}

impl Plan {
    pub fn new(steps: Vec<PlanStep>) -> Self {
        Self { steps }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn agents(&self) -> impl Iterator<Item = &str> {
        self.steps.iter().map(|s| s.agent_name.as_str())
    }

    pub fn has_valid_length(&self) -> bool {
        (MIN_PLAN_LENGTH..=MAX_PLAN_LENGTH).contains(&self.steps.len())
    }
}

/// Rounds to the six decimal places used on the wire.
pub fn quantize(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

fn ser_conf<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(quantize(*x))
}

fn ser_opt_conf<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match x {
        Some(v) => s.serialize_some(&quantize(*v)),
        None => s.serialize_none(),
    }
}

/// Structured routing decision. Serialized field order is the canonical wire
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoutingOutput {
    pub action: RoutingAction,
    #[serde(default)]
    pub target: Option<String>,
    #[serde(default)]
    pub args: Option<ArgumentSet>,
    #[serde(default)]
    pub plan: Option<Plan>,
    #[serde(default)]
    pub rationale: Option<String>,
    #[serde(serialize_with = "ser_conf")]
    pub confidence_action: f64,
    #[serde(default, serialize_with = "ser_opt_conf")]
    pub confidence_structure: Option<f64>,
    #[serde(serialize_with = "ser_conf")]
    pub confidence_effective: f64,
    #[serde(default)]
    pub backend_used: Backend,
}

impl RoutingOutput {
    /// A terminal (direct or escalate) output; effective confidence equals the
    /// action confidence.
    pub fn terminal(
        action: RoutingAction,
        rationale: Option<String>,
        confidence_action: f64,
        backend: Backend,
    ) -> Self {
        Self {
            action,
            target: None,
            args: None,
            plan: None,
            rationale,
            confidence_action,
            confidence_structure: None,
            confidence_effective: confidence_action,
            backend_used: backend,
        }
    }

    /// Activation rules, confidence ranges and the min rule for the effective
    /// confidence.
    pub fn check(&self) -> Result<(), RoutingError> {
        let bad = |m: &str| Err(RoutingError::InvalidOutput(m.to_string()));
        match self.action {
            RoutingAction::CallAgent => {
                if self.target.as_deref().is_none_or(|t| t.is_empty()) {
                    return bad("CALL_AGENT requires a target");
                }
                if self.plan.is_some() {
                    return bad("CALL_AGENT must not carry a plan");
                }
            }
            RoutingAction::MultiAgentPlan => {
                match &self.plan {
                    None => return bad("MULTI_AGENT_PLAN requires a plan"),
                    Some(p) if !p.has_valid_length() => {
                        return bad("plan length outside 2..=8");
                    }
                    Some(p) if p.steps.iter().any(|s| s.agent_name.is_empty()) => {
                        return bad("plan step without agent");
                    }
                    _ => {}
                }
                if self.target.is_some() || self.args.is_some() {
                    return bad("MULTI_AGENT_PLAN must not carry a target or top-level args");
                }
            }
            RoutingAction::DirectAnswer | RoutingAction::Escalate => {
                if self.target.is_some() || self.args.is_some() || self.plan.is_some() {
                    return bad("terminal actions carry no target, args or plan");
                }
            }
        }
        let in_unit = |x: f64| x.is_finite() && (0.0..=1.0).contains(&x);
        if !in_unit(self.confidence_action) || !in_unit(self.confidence_effective) {
            return bad("confidence outside [0, 1]");
        }
        if let Some(s) = self.confidence_structure {
            if !in_unit(s) {
                return bad("confidence outside [0, 1]");
            }
        }
        let expected = match self.confidence_structure {
            Some(s) => self.confidence_action.min(s),
            None => self.confidence_action,
        };
        if quantize(expected) != quantize(self.confidence_effective) {
            return bad("confidence_effective must equal the minimum stage confidence");
        }
        Ok(())
    }

    pub fn is_valid(&self) -> bool {
        self.check().is_ok()
    }

    /// Agent names referenced by the target or plan.
    pub fn referenced_agents(&self) -> Vec<&str> {
        let mut names: Vec<&str> = self.target.iter().map(String::as_str).collect();
        if let Some(plan) = &self.plan {
            names.extend(plan.agents());
        }
        names
    }

    /// Confidences rounded to wire precision, so a value equals its own
    /// parse-after-serialize.
    pub fn quantized(mut self) -> Self {
        self.confidence_action = quantize(self.confidence_action);
        self.confidence_structure = self.confidence_structure.map(quantize);
        self.confidence_effective = quantize(self.confidence_effective);
        self
    }

    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("routing output serializes")
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("routing output serializes")
    }
}

/// Raw text that could not be turned into a valid [`RoutingOutput`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseFailure {
    pub raw: String,
    pub reason: String,
}

impl fmt::Display for ParseFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unparseable routing output: {}", self.reason)
    }
}

impl std::error::Error for ParseFailure {}

/// Strict parse: unknown keys, unknown actions and activation violations
/// all yield a [`ParseFailure`].
pub fn parse_routing_output(raw: &str) -> Result<RoutingOutput, ParseFailure> {
    let fail = |reason: String| ParseFailure { raw: raw.to_string(), reason };
    let out: RoutingOutput = serde_json::from_str(raw.trim()).map_err(|e| fail(e.to_string()))?;
    out.check().map_err(|e| fail(e.to_string()))?;
    Ok(out)
}

/// The executable part of an output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExecObject<'a> {
    Call { target: &'a str, args: Option<&'a ArgumentSet> },
    Plan(&'a Plan),
    Empty,
}

pub fn exec_projection(output: &RoutingOutput) -> Result<ExecObject<'_>, RoutingError> {
    output.check()?;
    Ok(match output.action {
        RoutingAction::CallAgent => ExecObject::Call {
            target: output.target.as_deref().expect("checked"),
            args: output.args.as_ref(),
        },
        RoutingAction::MultiAgentPlan => ExecObject::Plan(output.plan.as_ref().expect("checked")),
        RoutingAction::DirectAnswer | RoutingAction::Escalate => ExecObject::Empty,
    })
}
