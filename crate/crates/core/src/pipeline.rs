//! Edge-first two-stage routing with safeguards and a confidence-gated cloud
//! fallback.
//!
//! Per attempt: Stage I action decision, fallback-adjusted action, then for
//! executable actions Stage II grounding followed by candidate recovery and
//! slot completion. An edge attempt whose effective confidence is below `tau`
//! is recomputed once on the cloud decider, if one is configured.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::deciders::{ActionDecision, Decider, DeciderError, GroundingResult};
use crate::fallback::{
    adjust_action, complete_slots, heuristic_plan, missing_required, recover_candidate,
    SafeguardConfig,
};
use crate::registry::AgentCard;
use crate::routing::{
    ArgumentSet, Backend, Plan, PlanStep, RoutingAction, RoutingError, RoutingInput,
    RoutingOutput,
};
use crate::validation::{validate_output, ValidationReport};

pub const DEFAULT_TAU: f64 = 0.8;
pub const MAX_BACKEND_ATTEMPTS: usize = 2;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    InvalidInput(#[from] RoutingError),
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
    #[error("confidence {0} outside [0, 1]")]
    DomainError(f64),
}

/// `min(gamma_act, gamma_str)`, or `gamma_act` when there was no Stage II.
pub fn effective_confidence(gamma_act: f64, gamma_str: Option<f64>) -> Result<f64, PipelineError> {
    let check = |x: f64| {
        if x.is_finite() && (0.0..=1.0).contains(&x) {
            Ok(x)
        } else {
            Err(PipelineError::DomainError(x))
        }
    };
    let act = check(gamma_act)?;
    Ok(match gamma_str {
        Some(s) => act.min(check(s)?),
        None => act,
    })
}

/// Cloud iff the effective confidence is strictly below `tau` and a cloud
/// backend exists.
pub fn select_backend(gamma_eff: f64, tau: f64, cloud_available: bool) -> Backend {
    if gamma_eff < tau && cloud_available {
        Backend::Cloud
    } else {
        Backend::Edge
    }
}

#[derive(Clone)]
pub struct PipelineConfig {
    pub tau: f64,
    pub edge: Arc<dyn Decider>,
    pub cloud: Option<Arc<dyn Decider>>,
    pub safeguards: SafeguardConfig,
}

impl PipelineConfig {
    pub fn new(edge: Arc<dyn Decider>, safeguards: SafeguardConfig) -> Self {
        Self { tau: DEFAULT_TAU, edge, cloud: None, safeguards }
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        self.tau = tau;
        self
    }

    pub fn with_cloud(mut self, cloud: Arc<dyn Decider>) -> Self {
        self.cloud = Some(cloud);
        self
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if !self.tau.is_finite() || self.tau < 0.0 {
            return Err(PipelineError::InvalidConfig(format!("tau must be finite and >= 0, got {}", self.tau)));
        }
        self.safeguards
            .validate()
            .map_err(|e| PipelineError::InvalidConfig(e.to_string()))
    }
}

impl fmt::Debug for PipelineConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PipelineConfig")
            .field("tau", &self.tau)
            .field("edge", &self.edge.name())
            .field("cloud", &self.cloud.as_ref().map(|c| c.name().to_string()))
            .field("safeguards", &self.safeguards)
            .finish()
    }
}

/// What happened during one backend attempt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub backend: Backend,
    pub stage1_raw: String,
    pub stage1: Option<ActionDecision>,
    pub stage1_error: Option<String>,
    pub adjusted_action: RoutingAction,
    pub stage2_invoked: bool,
    pub stage2_raw: Option<String>,
    pub stage2: Option<GroundingResult>,
    pub stage2_error: Option<String>,
    pub recovery_applied: bool,
    pub slots_completed: Vec<String>,
    /// Set when the adjusted action could not be grounded and was lowered.
    pub degraded_to: Option<RoutingAction>,
    pub gamma_act: f64,
    pub gamma_str: Option<f64>,
    pub gamma_eff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteTrace {
    pub attempts: Vec<AttemptRecord>,
    pub validation: ValidationReport,
}

impl RouteTrace {
    pub fn backends(&self) -> Vec<Backend> {
        self.attempts.iter().map(|a| a.backend).collect()
    }
}

/// Runs the routing pipeline. Holds no per-request state.
#[derive(Debug, Clone)]
pub struct Router {
    config: PipelineConfig,
}

impl Router {
    pub fn new(config: PipelineConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn route(&self, input: &RoutingInput) -> Result<(RoutingOutput, RouteTrace), PipelineError> {
        input.check()?;
        let cloud = self.config.cloud.as_ref();
        let mut attempts = Vec::with_capacity(MAX_BACKEND_ATTEMPTS);

        let (mut output, record) =
            self.attempt(input, Backend::Edge, self.config.edge.as_ref(), cloud.is_some())?;
        attempts.push(record);

        if let Some(cloud) = cloud {
            if select_backend(output.confidence_effective, self.config.tau, true) == Backend::Cloud {
                tracing::debug!(
                    gamma_eff = output.confidence_effective,
                    tau = self.config.tau,
                    "edge confidence below threshold, retrying on cloud"
                );
                let (cloud_output, record) = self.attempt(input, Backend::Cloud, cloud.as_ref(), false)?;
                output = cloud_output;
                attempts.push(record);
            }
        }

        let validation = validate_output(Ok(&output), input);
        Ok((output, RouteTrace { attempts, validation }))
    }

    fn attempt(
        &self,
        input: &RoutingInput,
        backend: Backend,
        decider: &dyn Decider,
        fallback_pending: bool,
    ) -> Result<(RoutingOutput, AttemptRecord), PipelineError> {
        let safeguards = &self.config.safeguards;
        let cands = &input.candidates;
        // Transport failures only surface when nothing else can answer.
        let unrecoverable = |e: &DeciderError| {
            backend == Backend::Edge
                && !fallback_pending
                && matches!(e, DeciderError::BackendUnavailable(_))
        };

        let stage1 = decider.decide_action(input);
        let (decision, stage1_error, stage1_raw) = match stage1 {
            Ok(d) => {
                let raw = d.raw.clone();
                (Some(d), None, raw)
            }
            Err(e) if unrecoverable(&e) => return Err(PipelineError::BackendUnavailable(e.to_string())),
            Err(e) => {
                let raw = match &e {
                    DeciderError::StageFailure { raw, .. } => raw.clone(),
                    _ => String::new(),
                };
                (None, Some(e.to_string()), raw)
            }
        };
        let gamma_act = decision.as_ref().map_or(0.0, |d| d.confidence);
        let rationale = decision.as_ref().and_then(|d| d.rationale.clone());
        let adjusted = adjust_action(&input.query, cands, decision.as_ref().map(|d| d.action), safeguards);

        let mut record = AttemptRecord {
            backend,
            stage1_raw,
            stage1: decision,
            stage1_error,
            adjusted_action: adjusted,
            stage2_invoked: false,
            stage2_raw: None,
            stage2: None,
            stage2_error: None,
            recovery_applied: false,
            slots_completed: Vec::new(),
            degraded_to: None,
            gamma_act,
            gamma_str: None,
            gamma_eff: gamma_act,
        };

        // Executable actions need at least one candidate to ground against.
        let terminal = if !adjusted.is_executable() {
            Some(adjusted)
        } else if cands.is_empty() {
            record.degraded_to = Some(RoutingAction::DirectAnswer);
            Some(RoutingAction::DirectAnswer)
        } else {
            None
        };
        if let Some(action) = terminal {
            let output = RoutingOutput::terminal(action, rationale, gamma_act, backend).quantized();
            record.gamma_eff = output.confidence_effective;
            return Ok((output, record));
        }

        record.stage2_invoked = true;
        let grounding = match decider.ground_structure(input, adjusted) {
            Ok(g) => {
                record.stage2_raw = Some(g.raw.clone());
                Some(g)
            }
            Err(e) if unrecoverable(&e) => return Err(PipelineError::BackendUnavailable(e.to_string())),
            Err(e) => {
                if let DeciderError::StageFailure { raw, .. } = &e {
                    record.stage2_raw = Some(raw.clone());
                }
                record.stage2_error = Some(e.to_string());
                None
            }
        };
        let gamma_str = grounding.as_ref().map_or(0.0, |g| g.confidence);
        record.stage2 = grounding.clone();

        let mut output = RoutingOutput::terminal(adjusted, rationale, gamma_act, backend);
        let plan = match adjusted {
            RoutingAction::MultiAgentPlan => {
                let proposed = grounding
                    .as_ref()
                    .and_then(|g| g.plan.clone())
                    .filter(|p| p.has_valid_length() && p.agents().all(|a| input.has_candidate(a)));
                match proposed {
                    Some(p) => Some(p),
                    None => {
                        record.recovery_applied = true;
                        heuristic_plan(cands, &input.query, safeguards)
                    }
                }
            }
            _ => None,
        };

        match plan {
            Some(plan) => {
                output.plan = Some(self.complete_plan(input, plan, &mut record.slots_completed));
            }
            None => {
                if adjusted == RoutingAction::MultiAgentPlan {
                    // A lone candidate cannot form a plan.
                    record.degraded_to = Some(RoutingAction::CallAgent);
                    output.action = RoutingAction::CallAgent;
                }
                let proposed = grounding
                    .as_ref()
                    .and_then(|g| g.target.as_ref())
                    .and_then(|t| input.candidate(t));
                let (card, base) = match proposed {
                    Some(card) => (card, grounding.as_ref().and_then(|g| g.args.clone()).unwrap_or_default()),
                    None => {
                        record.recovery_applied = true;
                        let card = recover_candidate(cands, &input.query, safeguards)
                            .expect("candidates checked non-empty");
                        (card, ArgumentSet::new())
                    }
                };
                let args = complete_args(&input.query, card, base, &mut record.slots_completed);
                output.target = Some(card.name.clone());
                output.args = Some(args);
            }
        }

        output.confidence_structure = Some(gamma_str);
        output.confidence_effective = effective_confidence(gamma_act, Some(gamma_str))?;
        let output = output.quantized();
        record.gamma_str = output.confidence_structure;
        record.gamma_eff = output.confidence_effective;
        Ok((output, record))
    }

    /// Filters each step's args to its schema and fills missing required
    /// slots from the matching clause (or the whole query when clauses and
    /// steps do not line up).
    fn complete_plan(&self, input: &RoutingInput, plan: Plan, completed: &mut Vec<String>) -> Plan {
        let clauses = self.config.safeguards.markers().split_clauses(&input.query);
        let aligned = clauses.len() == plan.len();
        let steps = plan
            .steps
            .into_iter()
            .enumerate()
            .map(|(i, step)| {
                let card = input.candidate(&step.agent_name).expect("plan agents are candidates");
                let text = if aligned { clauses[i] } else { input.query.as_str() };
                let args = complete_args(text, card, step.args, completed);
                PlanStep::new(step.agent_name, args)
            })
            .collect();
        Plan::new(steps)
    }
}

fn complete_args(
    text: &str,
    card: &AgentCard,
    mut args: ArgumentSet,
    completed: &mut Vec<String>,
) -> ArgumentSet {
    args.retain(|k, _| card.schema.contains(k));
    if missing_required(&card.schema, &args).is_empty() {
        return args;
    }
    let filled = complete_slots(text, &card.schema, &args);
    for key in filled.keys() {
        if !args.contains_key(key) {
            completed.push(key.to_string());
        }
    }
    filled
}
