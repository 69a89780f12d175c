//! Agent metadata store and lightweight candidate retrieval.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::fallback::{rank_candidates, SafeguardConfig};

pub const DEFAULT_K: usize = 5;

#[derive(Debug, thiserror::Error)]
pub enum RegistryError {
    #[error("agent `{0}` is already registered")]
    DuplicateName(String),
    #[error("invalid schema for agent `{agent}`: {reason}")]
    InvalidSchema { agent: String, reason: String },
    #[error("registry is empty")]
    EmptyRegistry,
    #[error("k must be at least 1")]
    InvalidK,
    #[error("unknown agent `{0}`")]
    UnknownAgent(String),
    #[error("failed to read registry file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed registry file: {0}")]
    Json(#[from] serde_json::Error),
}

/// Slot type vocabulary for argument fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotType {
    String,
    Number,
    Time,
    Location,
    Entity,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaField {
    pub name: String,
    #[serde(rename = "type")]
    pub slot_type: SlotType,
}

impl SchemaField {
    pub fn new(name: impl Into<String>, slot_type: SlotType) -> Self {
        Self { name: name.into(), slot_type }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArgumentSchema {
    #[serde(default)]
    pub required: Vec<SchemaField>,
    #[serde(default)]
    pub optional: Vec<SchemaField>,
}

impl ArgumentSchema {
    pub fn fields(&self) -> impl Iterator<Item = &SchemaField> {
        self.required.iter().chain(self.optional.iter())
    }

    pub fn field(&self, name: &str) -> Option<&SchemaField> {
        self.fields().find(|f| f.name == name)
    }

    pub fn is_required(&self, name: &str) -> bool {
        self.required.iter().any(|f| f.name == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.field(name).is_some()
    }

    /// Field names must be non-empty and unique across required and optional.
    pub fn check(&self) -> Result<(), String> {
        let mut seen = HashSet::new();
        for f in self.fields() {
            if f.name.trim().is_empty() {
                return Err("empty field name".into());
            }
            if !seen.insert(f.name.as_str()) {
                return Err(format!("duplicate field `{}`", f.name));
            }
        }
        Ok(())
    }
}

/// A registered agent: name, capability description and argument schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentCard {
    pub name: String,
    pub description: String,
    #[serde(default)]
    pub schema: ArgumentSchema,
}

impl AgentCard {
    pub fn new(
        name: impl Into<String>,
        description: impl Into<String>,
        schema: ArgumentSchema,
    ) -> Self {
        Self { name: name.into(), description: description.into(), schema }
    }

    pub fn validate(&self) -> Result<(), RegistryError> {
        if self.name.trim().is_empty() {
            return Err(RegistryError::InvalidSchema {
                agent: self.name.clone(),
                reason: "agent name is empty".into(),
            });
        }
        self.schema.check().map_err(|reason| RegistryError::InvalidSchema {
            agent: self.name.clone(),
            reason,
        })
    }

    /// Text the lexical scorer sees: name, description and schema field names.
    pub fn metadata_text(&self) -> String {
        let mut text = format!("{} {}", self.name, self.description);
        for f in self.schema.fields() {
            text.push(' ');
            text.push_str(&f.name);
        }
        text
    }
}

/// Ordered agent store. Registration order is the canonical index used for
/// every tie-break.
#[derive(Debug, Clone, Default)]
pub struct Registry {
    agents: Vec<AgentCard>,
    by_name: HashMap<String, usize>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, card: AgentCard) -> Result<usize, RegistryError> {
        card.validate()?;
        if self.by_name.contains_key(&card.name) {
            return Err(RegistryError::DuplicateName(card.name));
        }
        let idx = self.agents.len();
        self.by_name.insert(card.name.clone(), idx);
        self.agents.push(card);
        Ok(idx)
    }

    pub fn from_cards(cards: impl IntoIterator<Item = AgentCard>) -> Result<Self, RegistryError> {
        let mut reg = Self::new();
        for card in cards {
            reg.register(card)?;
        }
        Ok(reg)
    }

    pub fn from_json(json: &str) -> Result<Self, RegistryError> {
        let cards: Vec<AgentCard> = serde_json::from_str(json)?;
        Self::from_cards(cards)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, RegistryError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.agents).expect("cards serialize")
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    pub fn agents(&self) -> &[AgentCard] {
        &self.agents
    }

    pub fn lookup(&self, name: &str) -> Option<&AgentCard> {
        self.by_name.get(name).map(|&i| &self.agents[i])
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.by_name.get(name).copied()
    }

    /// Resolves names to cards, preserving the given order.
    pub fn resolve(&self, names: &[String]) -> Result<Vec<AgentCard>, RegistryError> {
        names
            .iter()
            .map(|n| self.lookup(n).cloned().ok_or_else(|| RegistryError::UnknownAgent(n.clone())))
            .collect()
    }

    /// Top `min(k, N)` agents by descending heuristic score, ties broken by
    /// registration order.
    pub fn retrieve_candidates(
        &self,
        query: &str,
        k: usize,
        config: &SafeguardConfig,
    ) -> Result<Vec<AgentCard>, RegistryError> {
        if k == 0 {
            return Err(RegistryError::InvalidK);
        }
        if self.agents.is_empty() {
            return Err(RegistryError::EmptyRegistry);
        }
        Ok(rank_candidates(&self.agents, query, config)
            .into_iter()
            .take(k)
            .map(|(i, _)| self.agents[i].clone())
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn card(name: &str, desc: &str) -> AgentCard {
        AgentCard::new(name, desc, ArgumentSchema::default())
    }

    #[test]
    fn register_preserves_order() {
        let mut reg = Registry::new();
        assert_eq!(reg.register(card("weather_api", "forecast")).unwrap(), 0);
        assert_eq!(reg.len(), 1);
        reg.register(card("b", "")).unwrap();
        reg.register(card("c", "")).unwrap();
        assert_eq!(reg.len(), 3);
        assert_eq!(reg.agents()[0].name, "weather_api");
        assert_eq!(reg.index_of("c"), Some(2));
    }

    #[test]
    fn duplicate_name_rejected() {
        let mut reg = Registry::new();
        reg.register(card("a", "x")).unwrap();
        assert!(matches!(reg.register(card("a", "y")), Err(RegistryError::DuplicateName(n)) if n == "a"));
        assert_eq!(reg.len(), 1);
    }

    #[test]
    fn invalid_schema_rejected() {
        let schema = ArgumentSchema {
            required: vec![SchemaField::new("city", SlotType::Location)],
            optional: vec![SchemaField::new("city", SlotType::Time)],
        };
        let err = Registry::new().register(AgentCard::new("w", "d", schema)).unwrap_err();
        assert!(matches!(err, RegistryError::InvalidSchema { .. }));
        assert!(matches!(
            Registry::new().register(card("  ", "d")),
            Err(RegistryError::InvalidSchema { .. })
        ));
    }

    #[test]
    fn unknown_slot_type_in_file_is_rejected() {
        let json = r#"[{"name":"a","description":"d","schema":{"required":[{"name":"x","type":"colour"}]}}]"#;
        assert!(matches!(Registry::from_json(json), Err(RegistryError::Json(_))));
    }

    #[test]
    fn json_round_trip() {
        let schema = ArgumentSchema {
            required: vec![SchemaField::new("city", SlotType::Location)],
            optional: vec![SchemaField::new("date", SlotType::Time)],
        };
        let reg = Registry::from_cards([AgentCard::new("weather_api", "forecast", schema)]).unwrap();
        let back = Registry::from_json(&reg.to_json()).unwrap();
        assert_eq!(back.agents(), reg.agents());
        assert!(reg.to_json().contains(r#""type": "location""#));
    }

    #[test]
    fn retrieval_edge_cases() {
        let cfg = SafeguardConfig::default();
        let empty = Registry::new();
        assert!(matches!(empty.retrieve_candidates("q", 3, &cfg), Err(RegistryError::EmptyRegistry)));

        let one = Registry::from_cards([card("solo", "does things")]).unwrap();
        assert_eq!(one.retrieve_candidates("anything", 5, &cfg).unwrap().len(), 1);
        assert!(matches!(one.retrieve_candidates("q", 0, &cfg), Err(RegistryError::InvalidK)));

        let flights = Registry::from_cards([
            card("grocery_order", "order groceries from the supermarket"),
            card("flight_booking", "book a flight ticket to a destination"),
        ])
        .unwrap();
        let top = flights.retrieve_candidates("book a flight to Paris", 1, &cfg).unwrap();
        assert_eq!(top[0].name, "flight_booking");

        let zeros = Registry::from_cards([card("a", "x"), card("b", "y"), card("c", "z")]).unwrap();
        let got: Vec<_> = zeros
            .retrieve_candidates("hello", 2, &cfg)
            .unwrap()
            .into_iter()
            .map(|c| c.name)
            .collect();
        assert_eq!(got, vec!["a", "b"]);
    }
}
