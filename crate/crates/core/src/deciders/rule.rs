use serde_json::json;

use super::{require_executable, ActionDecision, Decider, DeciderError, GroundingResult};
use crate::fallback::{complete_slots, heuristic_plan, rank_candidates, SafeguardConfig};
use crate::routing::{ArgumentSet, RoutingAction, RoutingInput};

pub const ESCALATE_CONFIDENCE: f64 = 0.95;
pub const UNIQUE_CALL_CONFIDENCE: f64 = 0.9;
pub const TIED_CALL_CONFIDENCE: f64 = 0.5;
pub const DIRECT_CONFIDENCE: f64 = 0.6;
pub const PLAN_CONFIDENCE: f64 = 0.7;

/// Lexical triggers plus metadata matching.
///
/// Action precedence: sensitive cue, then sequential marker with at least two
/// positively scored candidates, then any positive score, else direct answer.
#[derive(Debug, Clone, Default)]
pub struct RuleBasedDecider {
    safeguards: SafeguardConfig,
}

impl RuleBasedDecider {
    pub fn new(safeguards: SafeguardConfig) -> Self {
        Self { safeguards }
    }
}

impl Decider for RuleBasedDecider {
    fn name(&self) -> &str {
        "rule_based"
    }

    fn decide_action(&self, input: &RoutingInput) -> Result<ActionDecision, DeciderError> {
        let cfg = &self.safeguards;
        let query = &input.query;
        if let Some(cue) = cfg.sensitive_cue(query) {
            return Ok(ActionDecision::new(
                RoutingAction::Escalate,
                format!("sensitive cue `{cue}`"),
                ESCALATE_CONFIDENCE,
            ));
        }
        let ranked = rank_candidates(&input.candidates, query, cfg);
        let positive = ranked.iter().filter(|(_, s)| *s > 0.0).count();
        if cfg.is_sequential(query) && input.candidates.len() >= 2 && positive >= 2 {
            return Ok(ActionDecision::new(
                RoutingAction::MultiAgentPlan,
                "sequential marker over several matching agents",
                PLAN_CONFIDENCE,
            ));
        }
        if positive > 0 {
            let tied = ranked.len() > 1 && ranked[1].1 == ranked[0].1;
            let confidence = if tied { TIED_CALL_CONFIDENCE } else { UNIQUE_CALL_CONFIDENCE };
            let best = &input.candidates[ranked[0].0].name;
            return Ok(ActionDecision::new(
                RoutingAction::CallAgent,
                format!("metadata match on `{best}`"),
                confidence,
            ));
        }
        Ok(ActionDecision::new(
            RoutingAction::DirectAnswer,
            "no candidate matches the query",
            DIRECT_CONFIDENCE,
        ))
    }

    fn ground_structure(
        &self,
        input: &RoutingInput,
        action: RoutingAction,
    ) -> Result<GroundingResult, DeciderError> {
        require_executable(action)?;
        let cfg = &self.safeguards;
        if input.candidates.is_empty() {
            return Err(DeciderError::stage_failure("", "no candidates to ground against"));
        }
        if action == RoutingAction::MultiAgentPlan {
            return heuristic_plan(&input.candidates, &input.query, cfg)
                .map(|plan| GroundingResult::plan(plan, PLAN_CONFIDENCE))
                .ok_or_else(|| {
                    DeciderError::stage_failure(
                        json!({ "plan": null }).to_string(),
                        "fewer than two plan steps",
                    )
                });
        }
        let ranked = rank_candidates(&input.candidates, &input.query, cfg);
        let (best, top) = ranked[0];
        let unique = top > 0.0 && ranked.get(1).is_none_or(|r| r.1 < top);
        let card = &input.candidates[best];
        let args = complete_slots(&input.query, &card.schema, &ArgumentSet::new());
        let confidence = if unique { UNIQUE_CALL_CONFIDENCE } else { TIED_CALL_CONFIDENCE };
        Ok(GroundingResult::call(card.name.clone(), args, confidence))
    }
}
