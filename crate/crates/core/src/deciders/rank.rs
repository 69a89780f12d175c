use serde_json::json;

use super::{require_executable, ActionDecision, Decider, DeciderError, GroundingResult};
use crate::fallback::{
    clause_routes, complete_slots, heuristic_plan_sources, heuristic_score, rank_candidates,
    SafeguardConfig,
};
use crate::routing::{ArgumentSet, Plan, PlanStep, RoutingAction, RoutingInput};

pub const CLEAR_CONFIDENCE: f64 = 0.9;
pub const AMBIGUOUS_CONFIDENCE: f64 = 0.5;
/// A call is "clear" when the best candidate matches at least this score and
/// beats the runner-up.
pub const CLEAR_MATCH_SCORE: f64 = 2.0;

/// Lightweight action classification followed by lexical candidate ranking
/// and slot completion.
///
/// Structure confidence is the chosen candidate's share of the total score
/// over the candidate set.
#[derive(Debug, Clone, Default)]
pub struct RetrieveRankDecider {
    safeguards: SafeguardConfig,
}

impl RetrieveRankDecider {
    pub fn new(safeguards: SafeguardConfig) -> Self {
        Self { safeguards }
    }

    fn share(&self, input: &RoutingInput, chosen: usize, text: &str) -> f64 {
        let scores: Vec<f64> = input
            .candidates
            .iter()
            .map(|c| heuristic_score(c, text, &self.safeguards))
            .collect();
        let total: f64 = scores.iter().sum();
        if total > 0.0 {
            scores[chosen] / total
        } else {
            0.0
        }
    }
}

fn confidence(clear: bool) -> f64 {
    if clear {
        CLEAR_CONFIDENCE
    } else {
        AMBIGUOUS_CONFIDENCE
    }
}

impl Decider for RetrieveRankDecider {
    fn name(&self) -> &str {
        "retrieve_rank"
    }

    fn decide_action(&self, input: &RoutingInput) -> Result<ActionDecision, DeciderError> {
        let cfg = &self.safeguards;
        let query = &input.query;
        if let Some(cue) = cfg.sensitive_cue(query) {
            return Ok(ActionDecision::new(
                RoutingAction::Escalate,
                format!("sensitive cue `{cue}`"),
                CLEAR_CONFIDENCE,
            ));
        }
        if input.candidates.len() >= 2 && cfg.is_sequential(query) {
            let routes = clause_routes(&input.candidates, query, cfg);
            let first = routes.first().map(|r| r.candidate);
            if routes.iter().any(|r| Some(r.candidate) != first) {
                let clear = routes.iter().all(|r| !r.tied);
                return Ok(ActionDecision::new(
                    RoutingAction::MultiAgentPlan,
                    format!("{} clauses route to different agents", routes.len()),
                    confidence(clear),
                ));
            }
        }
        let ranked = rank_candidates(&input.candidates, query, cfg);
        match ranked.first() {
            Some(&(best, top)) if top > 0.0 => {
                let clear = top >= CLEAR_MATCH_SCORE && ranked.get(1).is_none_or(|r| r.1 < top);
                Ok(ActionDecision::new(
                    RoutingAction::CallAgent,
                    format!("`{}` ranks first with score {top}", input.candidates[best].name),
                    confidence(clear),
                ))
            }
            _ => Ok(ActionDecision::new(
                RoutingAction::DirectAnswer,
                "no candidate is relevant",
                CLEAR_CONFIDENCE,
            )),
        }
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
            let sources = heuristic_plan_sources(&input.candidates, &input.query, cfg)
                .ok_or_else(|| {
                    DeciderError::stage_failure(
                        json!({ "plan": null }).to_string(),
                        "fewer than two plan steps",
                    )
                })?;
            let confidence = sources
                .iter()
                .map(|&(i, text)| self.share(input, i, text))
                .fold(1.0, f64::min);
            let steps = sources
                .into_iter()
                .map(|(i, text)| {
                    let card = &input.candidates[i];
                    PlanStep::new(card.name.clone(), complete_slots(text, &card.schema, &ArgumentSet::new()))
                })
                .collect();
            return Ok(GroundingResult::plan(Plan::new(steps), confidence));
        }
        let (best, _) = rank_candidates(&input.candidates, &input.query, cfg)[0];
        let card = &input.candidates[best];
        let args = complete_slots(&input.query, &card.schema, &ArgumentSet::new());
        Ok(GroundingResult::call(card.name.clone(), args, self.share(input, best, &input.query)))
    }
}
