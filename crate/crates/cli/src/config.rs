//! Application settings: an optional TOML/JSON file with command-line
//! overrides layered on top.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use agentgate::benchgen;
use agentgate::deciders::RemoteConfig;
use agentgate::pipeline::DEFAULT_TAU;
use agentgate::registry::DEFAULT_K;
use agentgate::{Decider, DeciderConfig, DeciderKind, PipelineConfig, Registry, Router, SafeguardConfig};
use serde::Deserialize;

pub const DEFAULT_LISTEN: &str = "127.0.0.1:8080";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config `{path}`: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed config `{path}`: {reason}")]
    Parse { path: PathBuf, reason: String },
    #[error("{0}")]
    Invalid(String),
}

/// File form. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub registry: Option<PathBuf>,
    pub tau: Option<f64>,
    pub backend: Option<String>,
    pub cloud: Option<String>,
    pub k: Option<usize>,
    pub listen: Option<String>,
    pub log_level: Option<String>,
    pub safeguards: Option<SafeguardConfig>,
    pub remote: Option<RemoteConfig>,
}

impl FileConfig {
    /// TOML when the extension is `.toml`, JSON otherwise.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.into(), source })?;
        let parse_err = |reason: String| ConfigError::Parse { path: path.into(), reason };
        if path.extension().is_some_and(|e| e == "toml") {
            toml::from_str(&text).map_err(|e| parse_err(e.to_string()))
        } else {
            serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))
        }
    }
}

/// Command-line values; `Some` wins over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub registry: Option<PathBuf>,
    pub tau: Option<f64>,
    pub backend: Option<String>,
    pub cloud: Option<String>,
    pub k: Option<usize>,
    pub lambda: Option<f64>,
    pub listen: Option<String>,
    pub log_level: Option<String>,
    pub remote_endpoint: Option<String>,
    pub remote_model: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AppConfig {
    /// `None` means the built-in demo catalog.
    pub registry: Option<PathBuf>,
    pub tau: f64,
    pub backend: DeciderKind,
    pub cloud: Option<DeciderKind>,
    pub k: usize,
    pub listen: String,
    pub log_level: String,
    pub safeguards: SafeguardConfig,
    pub remote: Option<RemoteConfig>,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self::resolve(FileConfig::default(), Overrides::default()).expect("defaults are valid")
    }
}

fn kind(s: &str) -> Result<DeciderKind, ConfigError> {
    s.parse().map_err(|e: agentgate::DeciderError| ConfigError::Invalid(e.to_string()))
}

impl AppConfig {
    pub fn resolve(file: FileConfig, over: Overrides) -> Result<Self, ConfigError> {
        let backend = kind(over.backend.or(file.backend).as_deref().unwrap_or("rule"))?;
        let cloud = over.cloud.or(file.cloud).as_deref().map(kind).transpose()?;

        let mut safeguards = file.safeguards.unwrap_or_default();
        if let Some(l) = over.lambda {
            safeguards = safeguards.with_hint_weight(l);
        }
        safeguards.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;

        let mut remote = file.remote;
        match (over.remote_endpoint, over.remote_model) {
            (None, None) => {}
            (endpoint, model) => {
                let base = remote.take().unwrap_or_else(|| RemoteConfig::new("", "default"));
                remote = Some(RemoteConfig {
                    endpoint: endpoint.unwrap_or(base.endpoint.clone()),
                    model: model.unwrap_or(base.model.clone()),
                    ..base
                });
            }
        }

        let k = over.k.or(file.k).unwrap_or(DEFAULT_K);
        if k == 0 {
            return Err(ConfigError::Invalid("k must be at least 1".into()));
        }
        let tau = over.tau.or(file.tau).unwrap_or(DEFAULT_TAU);
        if !tau.is_finite() || tau < 0.0 {
            return Err(ConfigError::Invalid(format!("tau must be a non-negative number, got {tau}")));
        }
        Ok(Self {
            registry: over.registry.or(file.registry),
            tau,
            backend,
            cloud,
            k,
            listen: over.listen.or(file.listen).unwrap_or_else(|| DEFAULT_LISTEN.into()),
            log_level: over.log_level.or(file.log_level).unwrap_or_else(|| "info".into()),
            safeguards,
            remote,
        })
    }

    /// Loads the optional file at `path`, then applies `over`.
    pub fn load(path: Option<&Path>, over: Overrides) -> Result<Self, ConfigError> {
        let file = path.map(FileConfig::load).transpose()?.unwrap_or_default();
        Self::resolve(file, over)
    }

    fn decider(&self, kind: DeciderKind) -> Result<Arc<dyn Decider>, ConfigError> {
        let cfg = DeciderConfig { kind, remote: self.remote.clone() };
        cfg.build(&self.safeguards).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn router(&self) -> Result<Router, ConfigError> {
        let mut pc = PipelineConfig::new(self.decider(self.backend)?, self.safeguards.clone()).with_tau(self.tau);
        if let Some(cloud) = self.cloud {
            pc = pc.with_cloud(self.decider(cloud)?);
        }
        Router::new(pc).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn registry(&self) -> Result<Registry, ConfigError> {
        match &self.registry {
            Some(path) => Registry::load(path)
                .map_err(|e| ConfigError::Invalid(format!("registry `{}`: {e}", path.display()))),
            None => Registry::from_cards(benchgen::all_agent_cards())
                .map_err(|e| ConfigError::Invalid(e.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file = FileConfig { tau: Some(0.5), k: Some(3), backend: Some("rank".into()), ..Default::default() };
        let over = Overrides { tau: Some(0.9), lambda: Some(0.0), ..Default::default() };
        let cfg = AppConfig::resolve(file, over).unwrap();
        assert_eq!(cfg.tau, 0.9);
        assert_eq!(cfg.k, 3);
        assert_eq!(cfg.backend, DeciderKind::RetrieveRank);
        assert_eq!(cfg.safeguards.hint_weight, 0.0);
    }

    #[test]
    fn rejects_bad_values() {
        let bad = |over: Overrides| AppConfig::resolve(FileConfig::default(), over).is_err();
        assert!(bad(Overrides { k: Some(0), ..Default::default() }));
        assert!(bad(Overrides { tau: Some(-1.0), ..Default::default() }));
        assert!(bad(Overrides { lambda: Some(f64::NAN), ..Default::default() }));
        assert!(bad(Overrides { backend: Some("oracle".into()), ..Default::default() }));
    }

    #[test]
    fn remote_needs_an_endpoint() {
        let cfg = AppConfig::resolve(
            FileConfig::default(),
            Overrides { cloud: Some("remote".into()), ..Default::default() },
        )
        .unwrap();
        assert!(cfg.router().is_err());
    }

    #[test]
    fn default_registry_is_the_demo_catalog() {
        assert_eq!(AppConfig::default().registry().unwrap().len(), 20);
    }
}
