//! Action, candidate and schema consistency checks for routing outputs.

use serde::{Deserialize, Serialize};

use crate::fallback::extract_number;
use crate::registry::{AgentCard, SlotType};
use crate::routing::{ArgumentSet, ParseFailure, RoutingAction, RoutingInput, RoutingOutput};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub is_parseable: bool,
    pub action_consistent: bool,
    pub candidate_consistent: bool,
    pub schema_valid: bool,
    pub missing_required: Vec<String>,
    pub unknown_fields: Vec<String>,
}

impl ValidationReport {
    pub fn all_ok(&self) -> bool {
        self.is_parseable && self.action_consistent && self.candidate_consistent && self.schema_valid
    }
}

struct ArgCheck {
    missing: Vec<String>,
    unknown: Vec<String>,
    implausible: bool,
}

fn check_args(card: &AgentCard, args: Option<&ArgumentSet>) -> ArgCheck {
    let empty = ArgumentSet::new();
    let args = args.unwrap_or(&empty);
    let missing = card
        .schema
        .required
        .iter()
        .filter(|f| !args.contains_key(&f.name))
        .map(|f| f.name.clone())
        .collect();
    let unknown = args.keys().filter(|k| !card.schema.contains(k)).map(str::to_string).collect();
    // Number slots must hold a single numeric literal.
    let implausible = args.iter().any(|(k, v)| {
        card.schema.field(k).is_some_and(|f| f.slot_type == SlotType::Number)
            && extract_number(v).as_deref() != Some(v)
    });
    ArgCheck { missing, unknown, implausible }
}

/// Total check of an output (or parse failure) against its routing input.
pub fn validate_output(
    output: Result<&RoutingOutput, &ParseFailure>,
    input: &RoutingInput,
) -> ValidationReport {
    let Ok(output) = output else {
        return ValidationReport::default();
    };
    let mut report = ValidationReport {
        is_parseable: true,
        action_consistent: output.check().is_ok(),
        candidate_consistent: output.referenced_agents().iter().all(|n| input.has_candidate(n)),
        ..Default::default()
    };

    let calls: Vec<(&str, Option<&ArgumentSet>)> = match output.action {
        RoutingAction::CallAgent => output
            .target
            .as_deref()
            .map(|t| vec![(t, output.args.as_ref())])
            .unwrap_or_default(),
        RoutingAction::MultiAgentPlan => output
            .plan
            .iter()
            .flat_map(|p| p.steps.iter().map(|s| (s.agent_name.as_str(), Some(&s.args))))
            .collect(),
        RoutingAction::DirectAnswer | RoutingAction::Escalate => Vec::new(),
    };

    let mut structure_ok = !(output.action.is_executable() && calls.is_empty());
    let mut implausible = false;
    for (name, args) in calls {
        match input.candidate(name) {
            Some(card) => {
                let check = check_args(card, args);
                for m in check.missing {
                    if !report.missing_required.contains(&m) {
                        report.missing_required.push(m);
                    }
                }
                for u in check.unknown {
                    if !report.unknown_fields.contains(&u) {
                        report.unknown_fields.push(u);
                    }
                }
                implausible |= check.implausible;
            }
            // Schema of an unknown agent cannot be checked.
            None => structure_ok = false,
        }
    }
    report.schema_valid = structure_ok
        && !implausible
        && report.missing_required.is_empty()
        && report.unknown_fields.is_empty();
    report
}
