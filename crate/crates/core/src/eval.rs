//! Benchmark loading, per-instance exact-match scoring and metric
//! aggregation.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::pipeline::Router;
use crate::registry::AgentCard;
use crate::routing::{
    parse_routing_output, ArgumentSet, ParseFailure, Plan, RoutingAction, RoutingInput,
    RoutingOutput,
};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("failed to read benchmark: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: malformed instance: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: invalid gold label: {reason}")]
    InvalidGold { line: usize, reason: String },
    #[error("no instances to aggregate")]
    EmptyScores,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "validation" | "val" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldLabel {
    pub action: RoutingAction,
    #[serde(default)]
    pub target: Option<String>,
    #[serde(default)]
    pub args: Option<ArgumentSet>,
    #[serde(default)]
    pub plan: Option<Plan>,
}

impl GoldLabel {
    pub fn terminal(action: RoutingAction) -> Self {
        Self { action, target: None, args: None, plan: None }
    }

    pub fn call(target: impl Into<String>, args: ArgumentSet) -> Self {
        Self { action: RoutingAction::CallAgent, target: Some(target.into()), args: Some(args), plan: None }
    }

    pub fn plan(plan: Plan) -> Self {
        Self { action: RoutingAction::MultiAgentPlan, target: None, args: None, plan: Some(plan) }
    }

    /// Same activation rules as routing outputs, plus candidate membership.
    pub fn check(&self, candidates: &[AgentCard]) -> Result<(), String> {
        let known = |n: &str| candidates.iter().any(|c| c.name == n);
        match self.action {
            RoutingAction::CallAgent => {
                let target = self.target.as_deref().ok_or("CALL_AGENT gold without target")?;
                if self.plan.is_some() {
                    return Err("CALL_AGENT gold with a plan".into());
                }
                if !known(target) {
                    return Err(format!("gold target `{target}` is not a candidate"));
                }
            }
            RoutingAction::MultiAgentPlan => {
                let plan = self.plan.as_ref().ok_or("MULTI_AGENT_PLAN gold without plan")?;
                if !plan.has_valid_length() {
                    return Err(format!("gold plan has {} steps", plan.len()));
                }
                if self.target.is_some() || self.args.is_some() {
                    return Err("MULTI_AGENT_PLAN gold with target or args".into());
                }
                if let Some(a) = plan.agents().find(|a| !known(a)) {
                    return Err(format!("gold plan agent `{a}` is not a candidate"));
                }
            }
            RoutingAction::DirectAnswer | RoutingAction::Escalate => {
                if self.target.is_some() || self.args.is_some() || self.plan.is_some() {
                    return Err(format!("{} gold carries structure", self.action));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchInstance {
    pub id: String,
    pub split: Split,
    pub input: RoutingInput,
    pub gold: GoldLabel,
    pub tags: Vec<String>,
}

impl BenchInstance {
    pub fn is_hard_negative(&self) -> bool {
        self.tags.iter().any(|t| t.starts_with("hard_negative:"))
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&BenchRecord::from(self.clone())).expect("instance serializes")
    }
}

/// One JSONL line.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BenchRecord {
    id: String,
    split: Split,
    query: String,
    #[serde(default)]
    context: Option<String>,
    candidates: Vec<AgentCard>,
    gold: GoldLabel,
    #[serde(default)]
    tags: Vec<String>,
}

impl From<BenchInstance> for BenchRecord {
    fn from(b: BenchInstance) -> Self {
        Self {
            id: b.id,
            split: b.split,
            query: b.input.query,
            context: b.input.context,
            candidates: b.input.candidates,
            gold: b.gold,
            tags: b.tags,
        }
    }
}

fn is_header(value: &serde_json::Value) -> bool {
    value.get("generator_version").is_some()
}

/// Parses JSONL text. A leading generator header line is skipped.
pub fn parse_benchmark(text: &str) -> Result<Vec<BenchInstance>, EvalError> {
    let mut out = Vec::new();
    let mut seen_ids = HashSet::new();
    let mut first = true;
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| EvalError::MalformedLine { line: line_no, reason };
        let value: serde_json::Value = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        if std::mem::take(&mut first) && is_header(&value) {
            continue;
        }
        let rec: BenchRecord = serde_json::from_value(value).map_err(|e| malformed(e.to_string()))?;
        let input = RoutingInput { query: rec.query, candidates: rec.candidates, context: rec.context };
        input.check().map_err(|e| malformed(e.to_string()))?;
        let mut names = HashSet::new();
        for card in &input.candidates {
            card.validate().map_err(|e| malformed(e.to_string()))?;
            if !names.insert(card.name.as_str()) {
                return Err(malformed(format!("duplicate candidate `{}`", card.name)));
            }
        }
        if !seen_ids.insert(rec.id.clone()) {
            return Err(malformed(format!("duplicate id `{}`", rec.id)));
        }
        rec.gold
            .check(&input.candidates)
            .map_err(|reason| EvalError::InvalidGold { line: line_no, reason })?;
        out.push(BenchInstance { id: rec.id, split: rec.split, input, gold: rec.gold, tags: rec.tags });
    }
    Ok(out)
}

pub fn load_benchmark(path: impl AsRef<Path>) -> Result<Vec<BenchInstance>, EvalError> {
    parse_benchmark(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceScore {
    pub action_correct: bool,
    /// Only scored when the gold action is CALL_AGENT.
    pub agent_correct: Option<bool>,
    pub arg_correct: Option<bool>,
    /// Only scored when the gold action is MULTI_AGENT_PLAN.
    pub plan_correct: Option<bool>,
    pub is_valid_json: bool,
    pub gold_escalate: bool,
    pub pred_escalate: bool,
}

/// Absent arguments compare as the empty set; values are trimmed, case kept.
fn args_equal(pred: Option<&ArgumentSet>, gold: Option<&ArgumentSet>) -> bool {
    let empty = ArgumentSet::new();
    let norm = |a: Option<&ArgumentSet>| -> Vec<(String, String)> {
        a.unwrap_or(&empty).iter().map(|(k, v)| (k.to_string(), v.trim().to_string())).collect()
    };
    norm(pred) == norm(gold)
}

fn plans_equal(pred: Option<&Plan>, gold: &Plan) -> bool {
    let Some(pred) = pred else { return false };
    pred.len() == gold.len()
        && pred
            .steps
            .iter()
            .zip(&gold.steps)
            .all(|(p, g)| p.agent_name == g.agent_name && args_equal(Some(&p.args), Some(&g.args)))
}

pub fn score_instance(pred: Result<&RoutingOutput, &ParseFailure>, gold: &GoldLabel) -> InstanceScore {
    let gold_call = gold.action == RoutingAction::CallAgent;
    let gold_plan = gold.action == RoutingAction::MultiAgentPlan;
    let gold_escalate = gold.action == RoutingAction::Escalate;
    let Ok(pred) = pred else {
        return InstanceScore {
            action_correct: false,
            agent_correct: gold_call.then_some(false),
            arg_correct: gold_call.then_some(false),
            plan_correct: gold_plan.then_some(false),
            is_valid_json: false,
            gold_escalate,
            pred_escalate: false,
        };
    };
    InstanceScore {
        action_correct: pred.action == gold.action,
        agent_correct: gold_call.then(|| pred.target.is_some() && pred.target == gold.target),
        arg_correct: gold_call.then(|| args_equal(pred.args.as_ref(), gold.args.as_ref())),
        plan_correct: gold_plan
            .then(|| plans_equal(pred.plan.as_ref(), gold.plan.as_ref().expect("checked gold"))),
        is_valid_json: pred.check().is_ok(),
        gold_escalate,
        pred_escalate: pred.action == RoutingAction::Escalate,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub numerator: usize,
    pub denominator: usize,
}

impl Ratio {
    fn push(&mut self, hit: bool) {
        self.denominator += 1;
        self.numerator += usize::from(hit);
    }

    /// Zero denominators read as 0.0.
    pub fn value(&self) -> f64 {
        if self.denominator == 0 {
            0.0
        } else {
            self.numerator as f64 / self.denominator as f64
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricCounts {
    pub action: Ratio,
    pub agent: Ratio,
    pub arg: Ratio,
    pub plan: Ratio,
    pub json: Ratio,
    pub escalation_tp: usize,
    pub escalation_fp: usize,
    pub escalation_fn: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub action_accuracy: f64,
    pub agent_accuracy: f64,
    pub arg_em: f64,
    pub plan_em: f64,
    pub json_validity: f64,
    pub escalation_precision: f64,
    pub escalation_recall: f64,
    pub counts: MetricCounts,
}

impl MetricsReport {
    pub fn values(&self) -> [f64; 7] {
        [
            self.action_accuracy,
            self.agent_accuracy,
            self.arg_em,
            self.plan_em,
            self.json_validity,
            self.escalation_precision,
            self.escalation_recall,
        ]
    }
}

pub fn aggregate_metrics(scores: &[InstanceScore]) -> Result<MetricsReport, EvalError> {
    if scores.is_empty() {
        return Err(EvalError::EmptyScores);
    }
    let mut c = MetricCounts::default();
    for s in scores {
        c.action.push(s.action_correct);
        c.json.push(s.is_valid_json);
        if let Some(hit) = s.agent_correct {
            c.agent.push(hit);
        }
        if let Some(hit) = s.arg_correct {
            c.arg.push(hit);
        }
        if let Some(hit) = s.plan_correct {
            c.plan.push(hit);
        }
        match (s.gold_escalate, s.pred_escalate) {
            (true, true) => c.escalation_tp += 1,
            (false, true) => c.escalation_fp += 1,
            (true, false) => c.escalation_fn += 1,
            (false, false) => {}
        }
    }
    let precision = Ratio { numerator: c.escalation_tp, denominator: c.escalation_tp + c.escalation_fp };
    let recall = Ratio { numerator: c.escalation_tp, denominator: c.escalation_tp + c.escalation_fn };
    Ok(MetricsReport {
        action_accuracy: c.action.value(),
        agent_accuracy: c.agent.value(),
        arg_em: c.arg.value(),
        plan_em: c.plan.value(),
        json_validity: c.json.value(),
        escalation_precision: precision.value(),
        escalation_recall: recall.value(),
        counts: c,
    })
}

/// A prediction as the scorer sees it.
pub type Prediction = Result<RoutingOutput, ParseFailure>;

/// Routes an instance and passes the result through the canonical wire form,
/// so validity is judged on what a client would actually receive.
pub fn predict(router: &Router, input: &RoutingInput) -> Prediction {
    match router.route(input) {
        Ok((output, _)) => parse_routing_output(&output.to_canonical_json()),
        Err(e) => Err(ParseFailure { raw: String::new(), reason: e.to_string() }),
    }
}

pub fn evaluate_with<F>(instances: &[BenchInstance], mut predictor: F) -> Result<(Vec<InstanceScore>, MetricsReport), EvalError>
where
    F: FnMut(&RoutingInput) -> Prediction,
{
    let scores: Vec<InstanceScore> = instances
        .iter()
        .map(|inst| score_instance(predictor(&inst.input).as_ref(), &inst.gold))
        .collect();
    let report = aggregate_metrics(&scores)?;
    Ok((scores, report))
}

pub fn evaluate(router: &Router, instances: &[BenchInstance]) -> Result<MetricsReport, EvalError> {
    evaluate_with(instances, |input| predict(router, input)).map(|(_, r)| r)
}

pub fn filter_split(instances: Vec<BenchInstance>, split: Option<Split>) -> Vec<BenchInstance> {
    match split {
        Some(s) => instances.into_iter().filter(|i| i.split == s).collect(),
        None => instances,
    }
}
