//! Deterministic safeguards: the fallback-adjusted action, heuristic
//! candidate recovery and slot completion.

use std::collections::HashSet;
use std::path::Path;
use std::sync::{LazyLock, OnceLock};

use regex::{Regex, RegexBuilder};
use serde::{Deserialize, Serialize};

use crate::benchgen::DEFAULT_HINTS;
use crate::registry::{AgentCard, ArgumentSchema, SlotType};
use crate::routing::{ArgumentSet, Plan, PlanStep, RoutingAction, MAX_PLAN_LENGTH};
use crate::text::{find_substring_cue, token_set, tokenize, MarkerMatcher};

pub const DEFAULT_HINT_WEIGHT: f64 = 2.0;

pub const DEFAULT_SENSITIVE_CUES: &[&str] = &[
    "password",
    "credential",
    "api key",
    "secret key",
    "private key",
    "access token",
    "without authorization",
    "unauthorized",
    "bypass authentication",
    "bypass security",
    "delete all user",
    "wipe the database",
    "drop the database",
    "credit card number",
    "card numbers",
    "cvv",
    "social security number",
    "home addresses of",
    "personal data of",
    "stolen",
    "someone else's account",
    "admin privileges",
    "disable the audit log",
];

pub const DEFAULT_SEQUENTIAL_MARKERS: &[&str] = &["first", "then", "after that", "next", "finally"];

#[derive(Debug, thiserror::Error)]
pub enum FallbackError {
    #[error("candidate list is empty")]
    EmptyCandidates,
    #[error("hint_weight must be a finite non-negative number, got {0}")]
    InvalidHintWeight(f64),
    #[error("failed to read safeguard config: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed safeguard config: {0}")]
    Parse(String),
}

fn strings(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

/// Cue lists and hint weighting for the safeguards and the lexical scorer.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SafeguardConfig {
    pub sensitive_cues: Vec<String>,
    pub sequential_markers: Vec<String>,
    pub semantic_hints: Vec<String>,
    pub hint_weight: f64,
    #[serde(skip)]
    matcher: OnceLock<MarkerMatcher>,
}

impl Default for SafeguardConfig {
    fn default() -> Self {
        Self::new(
            strings(DEFAULT_SENSITIVE_CUES),
            strings(DEFAULT_SEQUENTIAL_MARKERS),
            strings(DEFAULT_HINTS),
            DEFAULT_HINT_WEIGHT,
        )
    }
}

impl PartialEq for SafeguardConfig {
    fn eq(&self, other: &Self) -> bool {
        self.sensitive_cues == other.sensitive_cues
            && self.sequential_markers == other.sequential_markers
            && self.semantic_hints == other.semantic_hints
            && self.hint_weight == other.hint_weight
    }
}

impl SafeguardConfig {
    pub fn new(
        sensitive_cues: Vec<String>,
        sequential_markers: Vec<String>,
        semantic_hints: Vec<String>,
        hint_weight: f64,
    ) -> Self {
        Self {
            sensitive_cues: sensitive_cues.into_iter().map(|c| c.to_lowercase()).collect(),
            sequential_markers: sequential_markers.into_iter().map(|c| c.to_lowercase()).collect(),
            semantic_hints,
            hint_weight,
            matcher: OnceLock::new(),
        }
    }

    pub fn with_hint_weight(mut self, hint_weight: f64) -> Self {
        self.hint_weight = hint_weight;
        self
    }

    pub fn with_hints(mut self, hints: Vec<String>) -> Self {
        self.semantic_hints = hints;
        self
    }

    pub fn validate(&self) -> Result<(), FallbackError> {
        if !self.hint_weight.is_finite() || self.hint_weight < 0.0 {
            return Err(FallbackError::InvalidHintWeight(self.hint_weight));
        }
        Ok(())
    }

    /// Loads a JSON or TOML file (chosen by extension, JSON otherwise).
    /// Missing keys keep their defaults.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, FallbackError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| FallbackError::Parse(e.to_string()))?
        } else {
            serde_json::from_str(&text).map_err(|e| FallbackError::Parse(e.to_string()))?
        };
        let cfg = Self::new(cfg.sensitive_cues, cfg.sequential_markers, cfg.semantic_hints, cfg.hint_weight);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn markers(&self) -> &MarkerMatcher {
        self.matcher.get_or_init(|| MarkerMatcher::new(&self.sequential_markers))
    }

    pub fn sensitive_cue(&self, query: &str) -> Option<&str> {
        find_substring_cue(query, &self.sensitive_cues)
    }

    pub fn is_sensitive(&self, query: &str) -> bool {
        self.sensitive_cue(query).is_some()
    }

    pub fn is_sequential(&self, query: &str) -> bool {
        self.markers().is_match(query)
    }

    /// Distinct lowercase hints.
    fn normalized_hints(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.semantic_hints
            .iter()
            .map(|h| h.trim().to_lowercase())
            .filter(|h| !h.is_empty() && seen.insert(h.clone()))
            .collect()
    }
}

/// Fallback-adjusted action. `stage1` is the Stage I prediction, or `None`
/// when that stage failed. Branches are checked in order and the first match
/// wins.
pub fn adjust_action(
    query: &str,
    candidates: &[AgentCard],
    stage1: Option<RoutingAction>,
    config: &SafeguardConfig,
) -> RoutingAction {
    if config.is_sensitive(query) {
        return RoutingAction::Escalate;
    }
    if config.is_sequential(query) && candidates.len() >= 2 {
        return RoutingAction::MultiAgentPlan;
    }
    match stage1 {
        None if !candidates.is_empty() => RoutingAction::CallAgent,
        None => RoutingAction::DirectAnswer,
        Some(action) => action,
    }
}

/// Lexical relevance: count of distinct query tokens found in the card's
/// metadata tokens, plus `hint_weight` for every hint present in both.
pub fn heuristic_score(card: &AgentCard, query: &str, config: &SafeguardConfig) -> f64 {
    let meta = token_set(&card.metadata_text());
    let query_tokens = tokenize(query);
    let overlap = query_tokens.iter().filter(|w| meta.contains(*w)).count();
    if config.hint_weight == 0.0 {
        return overlap as f64;
    }
    let qset: HashSet<&String> = query_tokens.iter().collect();
    let hinted = config
        .normalized_hints()
        .iter()
        .filter(|h| meta.contains(*h) && qset.contains(h))
        .count();
    overlap as f64 + config.hint_weight * hinted as f64
}

/// All candidates as `(index, score)`, by descending score then index.
pub fn rank_candidates(
    candidates: &[AgentCard],
    query: &str,
    config: &SafeguardConfig,
) -> Vec<(usize, f64)> {
    let mut ranked: Vec<(usize, f64)> = candidates
        .iter()
        .enumerate()
        .map(|(i, c)| (i, heuristic_score(c, query, config)))
        .collect();
    // Stable sort keeps index order among equal scores.
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    ranked
}

/// Index of the highest-scoring candidate, lowest index on ties.
pub fn recover_candidate_index(
    candidates: &[AgentCard],
    query: &str,
    config: &SafeguardConfig,
) -> Result<usize, FallbackError> {
    rank_candidates(candidates, query, config)
        .first()
        .map(|&(i, _)| i)
        .ok_or(FallbackError::EmptyCandidates)
}

pub fn recover_candidate<'a>(
    candidates: &'a [AgentCard],
    query: &str,
    config: &SafeguardConfig,
) -> Result<&'a AgentCard, FallbackError> {
    recover_candidate_index(candidates, query, config).map(|i| &candidates[i])
}

static NUMBER_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+(?:\.\d+)?").unwrap());
static TIME_RES: LazyLock<Vec<Regex>> = LazyLock::new(|| {
    [
        r"\b\d{4}-\d{2}-\d{2}\b",
        r"\b\d{1,2}:\d{2}\b",
        r"\btomorrow\b",
        r"\btoday\b",
        r"\b(?:monday|tuesday|wednesday|thursday|friday|saturday|sunday)\b",
    ]
    .iter()
    .map(|p| RegexBuilder::new(p).case_insensitive(true).build().unwrap())
    .collect()
});
static QUOTED_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#""([^"]+)"|“([^”]+)”"#).unwrap());

const LOCATION_PREPOSITIONS: &[&str] = &["in", "to", "at", "from"];

pub fn extract_number(query: &str) -> Option<String> {
    NUMBER_RE.find(query).map(|m| m.as_str().to_string())
}

/// Earliest match among the time patterns.
pub fn extract_time(query: &str) -> Option<String> {
    TIME_RES
        .iter()
        .filter_map(|re| re.find(query))
        .min_by_key(|m| m.start())
        .map(|m| m.as_str().to_string())
}

/// First capitalized word right after one of in/to/at/from.
pub fn extract_location(query: &str) -> Option<String> {
    let words: Vec<&str> = query.split_whitespace().collect();
    words.windows(2).find_map(|pair| {
        let prep = pair[0].trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase();
        if !LOCATION_PREPOSITIONS.contains(&prep.as_str()) {
            return None;
        }
        let word = pair[1].trim_matches(|c: char| !c.is_alphanumeric());
        word.chars().next().filter(|c| c.is_uppercase()).map(|_| word.to_string())
    })
}

/// Longest quoted span; the earliest wins on equal length.
pub fn extract_quoted(query: &str) -> Option<String> {
    let mut best: Option<&str> = None;
    for caps in QUOTED_RE.captures_iter(query) {
        let span = caps.get(1).or_else(|| caps.get(2)).map(|m| m.as_str().trim()).unwrap_or("");
        if span.is_empty() {
            continue;
        }
        if best.is_none_or(|b| span.chars().count() > b.chars().count()) {
            best = Some(span);
        }
    }
    best.map(str::to_string)
}

pub fn extract_slot(query: &str, slot_type: SlotType) -> Option<String> {
    match slot_type {
        SlotType::Number => extract_number(query),
        SlotType::Time => extract_time(query),
        SlotType::Location => extract_location(query),
        SlotType::Entity | SlotType::String => extract_quoted(query),
    }
}

/// Fills missing required fields from the query text. Existing values are
/// never overwritten; unextractable slots stay absent.
pub fn complete_slots(query: &str, schema: &ArgumentSchema, partial: &ArgumentSet) -> ArgumentSet {
    let mut out = partial.clone();
    for field in &schema.required {
        if out.contains_key(&field.name) {
            continue;
        }
        if let Some(value) = extract_slot(query, field.slot_type) {
            out.insert(field.name.clone(), value);
        }
    }
    out
}

pub fn missing_required<'a>(schema: &'a ArgumentSchema, args: &ArgumentSet) -> Vec<&'a str> {
    schema
        .required
        .iter()
        .filter(|f| !args.contains_key(&f.name))
        .map(|f| f.name.as_str())
        .collect()
}

/// Best candidate for one clause of a sequential query.
#[derive(Debug, Clone, PartialEq)]
pub struct ClauseRoute<'q> {
    pub clause: &'q str,
    pub candidate: usize,
    pub score: f64,
    /// Another candidate shares the top score.
    pub tied: bool,
}

/// Splits the query at sequential markers and ranks candidates per clause.
/// Clauses where every candidate scores zero are dropped.
pub fn clause_routes<'q>(
    candidates: &[AgentCard],
    query: &'q str,
    config: &SafeguardConfig,
) -> Vec<ClauseRoute<'q>> {
    if candidates.is_empty() {
        return Vec::new();
    }
    config
        .markers()
        .split_clauses(query)
        .into_iter()
        .filter_map(|clause| {
            let ranked = rank_candidates(candidates, clause, config);
            let (best, score) = ranked[0];
            let tied = ranked.get(1).is_some_and(|r| r.1 == score);
            (score > 0.0).then_some(ClauseRoute { clause, candidate: best, score, tied })
        })
        .collect()
}

/// Source of each heuristic plan step: candidate index and the text its
/// slots are extracted from. Steps come from per-clause routing with
/// consecutive duplicates merged; short plans are padded with the best
/// remaining candidates for the whole query. `None` when fewer than two steps
/// can be formed.
pub fn heuristic_plan_sources<'q>(
    candidates: &[AgentCard],
    query: &'q str,
    config: &SafeguardConfig,
) -> Option<Vec<(usize, &'q str)>> {
    let mut steps: Vec<(usize, &str)> = Vec::new();
    for route in clause_routes(candidates, query, config) {
        if steps.last().is_some_and(|&(i, _)| i == route.candidate) {
            continue;
        }
        steps.push((route.candidate, route.clause));
    }
    if steps.len() < 2 {
        for (i, _) in rank_candidates(candidates, query, config) {
            if steps.len() >= 2 {
                break;
            }
            if steps.iter().all(|&(j, _)| j != i) {
                steps.push((i, query));
            }
        }
    }
    if steps.len() < 2 {
        return None;
    }
    steps.truncate(MAX_PLAN_LENGTH);
    Some(steps)
}

pub fn heuristic_plan(
    candidates: &[AgentCard],
    query: &str,
    config: &SafeguardConfig,
) -> Option<Plan> {
    let steps = heuristic_plan_sources(candidates, query, config)?;
    Some(Plan::new(
        steps
            .into_iter()
            .map(|(i, text)| {
                let card = &candidates[i];
                PlanStep::new(card.name.clone(), complete_slots(text, &card.schema, &ArgumentSet::new()))
            })
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::SchemaField;

    fn card(name: &str, desc: &str, required: &[(&str, SlotType)]) -> AgentCard {
        AgentCard::new(
            name,
            desc,
            ArgumentSchema {
                required: required.iter().map(|(n, t)| SchemaField::new(*n, *t)).collect(),
                optional: vec![],
            },
        )
    }

    fn no_hints() -> SafeguardConfig {
        SafeguardConfig::default().with_hints(vec![])
    }

    #[test]
    fn adjust_action_examples() {
        let cfg = SafeguardConfig::default();
        let two = vec![card("weather_api", "w", &[]), card("ride_hailing", "r", &[])];
        assert_eq!(
            adjust_action("delete all user records without authorization", &two, Some(RoutingAction::CallAgent), &cfg),
            RoutingAction::Escalate
        );
        assert_eq!(
            adjust_action("first check weather, then book a cab", &two, Some(RoutingAction::CallAgent), &cfg),
            RoutingAction::MultiAgentPlan
        );
        assert_eq!(adjust_action("hello", &[], None, &cfg), RoutingAction::DirectAnswer);
        assert_eq!(adjust_action("hello", &two, None, &cfg), RoutingAction::CallAgent);
        assert_eq!(
            adjust_action("hello", &two, Some(RoutingAction::DirectAnswer), &cfg),
            RoutingAction::DirectAnswer
        );
    }

    #[test]
    fn score_examples() {
        let cfg = no_hints();
        let c = card("x", "Reserve a table, reserve now", &[]);
        assert_eq!(heuristic_score(&c, "", &cfg), 0.0);
        // tokens of name ∪ description: {x, reserve, a, table, now}
        assert_eq!(heuristic_score(&c, "Reserve a table, reserve now", &cfg), 4.0);

        let flight = AgentCard::new("flight", "booking travel", ArgumentSchema::default());
        let hinted = SafeguardConfig::default()
            .with_hints(vec!["flight".into()])
            .with_hint_weight(2.0);
        assert_eq!(heuristic_score(&flight, "book flight", &hinted), 3.0);
    }

    #[test]
    fn schema_field_names_count_as_metadata() {
        let c = card("agent", "does things", &[("city", SlotType::Location)]);
        assert_eq!(heuristic_score(&c, "city", &no_hints()), 1.0);
    }

    #[test]
    fn recovery_picks_argmax_with_index_tiebreak() {
        let cfg = no_hints();
        let solo = vec![card("solo", "nothing relevant", &[])];
        assert_eq!(recover_candidate(&solo, "zzz", &cfg).unwrap().name, "solo");

        let pair = vec![card("a", "book", &[]), card("b", "book flight ticket", &[])];
        assert_eq!(recover_candidate(&pair, "book flight ticket", &cfg).unwrap().name, "b");

        let zeros = vec![card("a", "x", &[]), card("b", "y", &[])];
        assert_eq!(recover_candidate(&zeros, "qq", &cfg).unwrap().name, "a");

        assert!(matches!(recover_candidate(&[], "q", &cfg), Err(FallbackError::EmptyCandidates)));
    }

    #[test]
    fn slot_completion_examples() {
        let weather = card("weather_api", "", &[("city", SlotType::Location)]).schema;
        let got = complete_slots("weather in Beijing", &weather, &ArgumentSet::new());
        assert_eq!(got.get("city"), Some("Beijing"));

        let full: ArgumentSet = [("city", "Paris")].into_iter().collect();
        assert_eq!(complete_slots("weather in Beijing", &weather, &full), full);

        let count = card("g", "", &[("count", SlotType::Number)]).schema;
        assert_eq!(complete_slots("order 3 pizzas", &count, &ArgumentSet::new()).get("count"), Some("3"));

        let nothing = complete_slots("weather please", &weather, &ArgumentSet::new());
        assert!(nothing.is_empty());
    }

    #[test]
    fn extractors() {
        assert_eq!(extract_time("meet at 19:30 tomorrow").as_deref(), Some("19:30"));
        assert_eq!(extract_time("on Friday or 2025-03-01").as_deref(), Some("Friday"));
        assert_eq!(extract_time("sometime"), None);
        assert_eq!(extract_location("fly from Rome to Oslo").as_deref(), Some("Rome"));
        assert_eq!(extract_location("a taxi to the Louvre"), None);
        assert_eq!(extract_location("weather in Paris, tomorrow").as_deref(), Some("Paris"));
        assert_eq!(extract_quoted(r#"watch "Up" or "Dune Part Two""#).as_deref(), Some("Dune Part Two"));
        assert_eq!(extract_number("version 2.5 of 3").as_deref(), Some("2.5"));
    }

    #[test]
    fn heuristic_plan_routes_each_clause() {
        let cfg = no_hints();
        let cands = vec![
            card("grocery_order", "order groceries", &[("count", SlotType::Number)]),
            card("ride_hailing", "book a taxi ride", &[("destination", SlotType::Location)]),
        ];
        let plan = heuristic_plan(&cands, "order 3 groceries then book a taxi to Rome", &cfg).unwrap();
        assert_eq!(plan.agents().collect::<Vec<_>>(), vec!["grocery_order", "ride_hailing"]);
        assert_eq!(plan.steps[0].args.get("count"), Some("3"));
        assert_eq!(plan.steps[1].args.get("destination"), Some("Rome"));

        // a single clause is padded with the runner-up
        let padded = heuristic_plan(&cands, "then order groceries", &cfg).unwrap();
        assert_eq!(padded.len(), 2);
        assert!(heuristic_plan(&cands[..1], "order groceries then order more", &cfg).is_none());
    }

    #[test]
    fn config_file_loading() {
        let dir = tempfile::tempdir().unwrap();
        let toml_path = dir.path().join("safe.toml");
        std::fs::write(&toml_path, "hint_weight = 3.5\nsensitive_cues = [\"Secret\"]\n").unwrap();
        let cfg = SafeguardConfig::from_file(&toml_path).unwrap();
        assert_eq!(cfg.hint_weight, 3.5);
        assert_eq!(cfg.sensitive_cues, vec!["secret"]);
        assert_eq!(cfg.sequential_markers, strings(DEFAULT_SEQUENTIAL_MARKERS));

        let json_path = dir.path().join("safe.json");
        std::fs::write(&json_path, r#"{"hint_weight": -1}"#).unwrap();
        assert!(matches!(SafeguardConfig::from_file(&json_path), Err(FallbackError::InvalidHintWeight(_))));
    }
}
