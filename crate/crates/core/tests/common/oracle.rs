//! Brute-force reference implementations and random input generators.
//!
//! Everything here is written from the definitions, without calling the
//! library's scoring, ranking or metric code.

#![allow(dead_code)]

use agentgate::eval::GoldLabel;
use agentgate::routing::ParseFailure;
use agentgate::{
    AgentCard, ArgumentSchema, ArgumentSet, Backend, Plan, PlanStep, RoutingAction, RoutingOutput,
    SchemaField, SlotType,
};
use rand::seq::IndexedRandom;
use rand::Rng;

/// Lowercased alphanumeric runs, in order, with repeats.
pub fn words(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            cur.push(ch);
        } else if !cur.is_empty() {
            out.push(cur.to_lowercase());
            cur.clear();
        }
    }
    if !cur.is_empty() {
        out.push(cur.to_lowercase());
    }
    out
}

fn distinct(v: Vec<String>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for w in v {
        if !out.contains(&w) {
            out.push(w);
        }
    }
    out
}

/// Overlap term plus hint term, summed one term at a time.
pub fn brute_score(card: &AgentCard, query: &str, hints: &[String], lambda: f64) -> f64 {
    let mut meta = words(&card.name);
    meta.extend(words(&card.description));
    for f in card.schema.required.iter().chain(&card.schema.optional) {
        meta.extend(words(&f.name));
    }
    let q = distinct(words(query));
    let mut overlap = 0.0;
    for w in &q {
        if meta.contains(w) {
            overlap += 1.0;
        }
    }
    let hs = distinct(hints.iter().map(|h| h.trim().to_lowercase()).filter(|h| !h.is_empty()).collect());
    let mut hinted = 0.0;
    for h in &hs {
        if meta.contains(h) && q.contains(h) {
            hinted += 1.0;
        }
    }
    overlap + lambda * hinted
}

/// First index holding the maximum.
pub fn brute_argmax(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        match best {
            Some(b) if scores[b] >= *s => {}
            _ => best = Some(i),
        }
    }
    best
}

fn same_args(a: Option<&ArgumentSet>, b: Option<&ArgumentSet>) -> bool {
    let pairs = |x: Option<&ArgumentSet>| -> Vec<(String, String)> {
        let mut v: Vec<(String, String)> = x
            .map(|s| s.iter().map(|(k, v)| (k.to_string(), v.trim().to_string())).collect())
            .unwrap_or_default();
        v.sort();
        v
    };
    pairs(a) == pairs(b)
}

/// Activation and confidence rules, restated.
pub fn brute_valid(o: &RoutingOutput) -> bool {
    let unit = |x: f64| x.is_finite() && (0.0..=1.0).contains(&x);
    let shape = match o.action {
        RoutingAction::CallAgent => {
            o.target.as_ref().is_some_and(|t| !t.is_empty()) && o.plan.is_none()
        }
        RoutingAction::MultiAgentPlan => {
            o.target.is_none()
                && o.args.is_none()
                && o.plan.as_ref().is_some_and(|p| {
                    p.steps.len() >= 2 && p.steps.len() <= 8 && p.steps.iter().all(|s| !s.agent_name.is_empty())
                })
        }
        _ => o.target.is_none() && o.args.is_none() && o.plan.is_none(),
    };
    let min = match o.confidence_structure {
        Some(s) => o.confidence_action.min(s),
        None => o.confidence_action,
    };
    shape
        && unit(o.confidence_action)
        && unit(o.confidence_effective)
        && o.confidence_structure.is_none_or(unit)
        && (min * 1e6).round() == (o.confidence_effective * 1e6).round()
}

/// The seven aggregate metrics straight from (prediction, gold) pairs.
pub fn brute_metrics(pairs: &[(Result<RoutingOutput, ParseFailure>, GoldLabel)]) -> [f64; 7] {
    let frac = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let n = pairs.len();
    let mut action = 0;
    let (mut calls, mut agent, mut arg) = (0, 0, 0);
    let (mut plans, mut plan) = (0, 0);
    let mut valid = 0;
    let (mut tp, mut fp, mut fneg) = (0, 0, 0);
    for (pred, gold) in pairs {
        let p = pred.as_ref().ok();
        if p.is_some_and(|p| p.action == gold.action) {
            action += 1;
        }
        if p.is_some_and(brute_valid) {
            valid += 1;
        }
        if gold.action == RoutingAction::CallAgent {
            calls += 1;
            if p.is_some_and(|p| p.target.is_some() && p.target == gold.target) {
                agent += 1;
            }
            if p.is_some_and(|p| same_args(p.args.as_ref(), gold.args.as_ref())) {
                arg += 1;
            }
        }
        if gold.action == RoutingAction::MultiAgentPlan {
            plans += 1;
            let g = gold.plan.as_ref().unwrap();
            let hit = p.and_then(|p| p.plan.as_ref()).is_some_and(|pp| {
                pp.steps.len() == g.steps.len()
                    && (0..g.steps.len()).all(|i| {
                        pp.steps[i].agent_name == g.steps[i].agent_name
                            && same_args(Some(&pp.steps[i].args), Some(&g.steps[i].args))
                    })
            });
            if hit {
                plan += 1;
            }
        }
        let gp = gold.action == RoutingAction::Escalate;
        let pp = p.is_some_and(|p| p.action == RoutingAction::Escalate);
        match (gp, pp) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fneg += 1,
            _ => {}
        }
    }
    [
        frac(action, n),
        frac(agent, calls),
        frac(arg, calls),
        frac(plan, plans),
        frac(valid, n),
        frac(tp, tp + fp),
        frac(tp, tp + fneg),
    ]
}

// ---- random generators -------------------------------------------------

pub const AGENT_POOL: &[&str] = &["weather_api", "ride_hailing", "hotel_booking", "calendar", "grocery_order"];
const KEYS: &[&str] = &["city", "time", "count", "dish"];
const VALUES: &[&str] = &["Beijing", "beijing", " Paris ", "3", "tomorrow", "pad thai", "19:30"];
const VOCAB: &[&str] = &[
    "book", "flight", "to", "paris", "weather", "in", "beijing", "order", "groceries", "taxi", "the",
    "a", "hotel", "room", "Weather", "FLIGHT", "city", "time", "rain", "café", "Zürich", "2", "then",
];
const PUNCT: &[&str] = &[" ", " ", " ", ", ", "-", "_", "?", "! ", "  ", "/"];

pub fn random_text<R: Rng>(rng: &mut R, max_words: usize) -> String {
    let n = rng.random_range(0..=max_words);
    let mut s = String::new();
    for i in 0..n {
        if i > 0 {
            s.push_str(PUNCT.choose(rng).unwrap());
        }
        s.push_str(VOCAB.choose(rng).unwrap());
    }
    s
}

pub fn random_card<R: Rng>(rng: &mut R, name: String) -> AgentCard {
    let types = [SlotType::Location, SlotType::Time, SlotType::Number, SlotType::Entity, SlotType::String];
    let mut fields: Vec<SchemaField> = Vec::new();
    for key in KEYS {
        if rng.random_bool(0.3) {
            fields.push(SchemaField::new(*key, *types.choose(rng).unwrap()));
        }
    }
    let split = rng.random_range(0..=fields.len());
    let optional = fields.split_off(split);
    AgentCard::new(name, random_text(rng, 8), ArgumentSchema { required: fields, optional })
}

pub fn random_hints<R: Rng>(rng: &mut R) -> Vec<String> {
    let n = rng.random_range(0..=4);
    (0..n)
        .map(|_| {
            let w = VOCAB.choose(rng).unwrap();
            if rng.random_bool(0.2) { format!(" {} ", w.to_uppercase()) } else { w.to_string() }
        })
        .collect()
}

pub fn random_args<R: Rng>(rng: &mut R) -> ArgumentSet {
    let mut args = ArgumentSet::new();
    for k in KEYS {
        if rng.random_bool(0.4) {
            args.insert(*k, VALUES.choose(rng).unwrap());
        }
    }
    args
}

fn random_plan<R: Rng>(rng: &mut R) -> Plan {
    let n = rng.random_range(2..=4);
    Plan::new(
        (0..n)
            .map(|_| PlanStep::new(*AGENT_POOL.choose(rng).unwrap(), random_args(rng)))
            .collect(),
    )
}

fn conf<R: Rng>(rng: &mut R) -> f64 {
    // A few exact grid values so ties and boundaries show up.
    if rng.random_bool(0.3) {
        *[0.0, 0.5, 0.75, 0.9, 1.0].choose(rng).unwrap()
    } else {
        (rng.random_range(0..=1_000_000) as f64) / 1e6
    }
}

/// A random output that satisfies every activation and confidence rule.
pub fn random_valid_output<R: Rng>(rng: &mut R) -> RoutingOutput {
    let action = *RoutingAction::ALL.choose(rng).unwrap();
    let backend = if rng.random_bool(0.5) { Backend::Edge } else { Backend::Cloud };
    let rationale = rng.random_bool(0.5).then(|| random_text(rng, 6));
    let ca = conf(rng);
    let (target, args, plan, cs) = match action {
        RoutingAction::CallAgent => (
            Some(AGENT_POOL.choose(rng).unwrap().to_string()),
            rng.random_bool(0.8).then(|| random_args(rng)),
            None,
            Some(conf(rng)),
        ),
        RoutingAction::MultiAgentPlan => (None, None, Some(random_plan(rng)), Some(conf(rng))),
        _ => (None, None, None, None),
    };
    let ce = cs.map_or(ca, |s: f64| ca.min(s));
    RoutingOutput {
        action,
        target,
        args,
        plan,
        rationale,
        confidence_action: ca,
        confidence_structure: cs,
        confidence_effective: ce,
        backend_used: backend,
    }
}

pub fn random_gold<R: Rng>(rng: &mut R) -> GoldLabel {
    match *RoutingAction::ALL.choose(rng).unwrap() {
        RoutingAction::CallAgent => GoldLabel::call(*AGENT_POOL.choose(rng).unwrap(), random_args(rng)),
        RoutingAction::MultiAgentPlan => GoldLabel::plan(random_plan(rng)),
        a => GoldLabel::terminal(a),
    }
}

/// A prediction drawn to collide with `gold` often: copies, perturbations,
/// activation violations and parse failures.
pub fn random_prediction<R: Rng>(rng: &mut R, gold: &GoldLabel) -> Result<RoutingOutput, ParseFailure> {
    match rng.random_range(0..10) {
        0 => Err(ParseFailure { raw: "{not json".into(), reason: "syntax".into() }),
        1..=3 => {
            let mut o = random_valid_output(rng);
            o.action = gold.action;
            o.target = gold.target.clone();
            o.args = gold.args.clone();
            o.plan = gold.plan.clone();
            if o.action.is_executable() && o.confidence_structure.is_none() {
                o.confidence_structure = Some(o.confidence_action);
            }
            if rng.random_bool(0.3) {
                o.args = rng.random_bool(0.5).then(|| random_args(rng));
            }
            Ok(o)
        }
        4 => {
            // Activation violation: terminal action carrying a target.
            let mut o = random_valid_output(rng);
            o.action = RoutingAction::DirectAnswer;
            o.target = Some("weather_api".into());
            Ok(o)
        }
        _ => Ok(random_valid_output(rng)),
    }
}
