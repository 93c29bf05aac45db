//! Run configuration: a TOML file with command-line overrides on top.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Deserialize;
use tabqa_core::{AgentConfig, PromptOptions, Strategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Completions,
    Chat,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub endpoint: String,
    pub model: Option<String>,
    /// Name of the environment variable holding the API key.
    pub api_key_env: String,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Completions,
            endpoint: "https://api.openai.com/v1".into(),
            model: None,
            api_key_env: "OPENAI_API_KEY".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentSection {
    pub strategy: Option<Strategy>,
    pub n: Option<usize>,
    pub temperature: Option<f64>,
    pub max_iterations: Option<usize>,
    pub sql_only: Option<bool>,
    pub tree_branch_budget: Option<usize>,
    pub row_cap: Option<usize>,
    pub max_tokens: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SidecarConfig {
    pub command: Option<String>,
    pub timeout_secs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub backend: BackendConfig,
    pub agent: AgentSection,
    pub demos: Option<PathBuf>,
    /// Store that live responses are appended to.
    pub cache: Option<PathBuf>,
    /// Store that responses are served from, with no live backend.
    pub replay: Option<PathBuf>,
    pub sidecar: SidecarConfig,
    pub workers: Option<usize>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid config {path}: {source}")]
    Toml { path: String, source: toml::de::Error },
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        toml::from_str(&text).map_err(|source| ConfigError::Toml {
            path: path.display().to_string(),
            source,
        })
    }

    /// Strategy defaults (sample count and temperature) apply first, then
    /// explicit settings.
    pub fn agent_config(&self) -> AgentConfig {
        let a = &self.agent;
        let mut cfg = AgentConfig::new(a.strategy.unwrap_or(Strategy::None));
        if let Some(n) = a.n {
            cfg.n = n;
        }
        if let Some(t) = a.temperature {
            cfg.temperature = t;
        }
        if a.max_iterations.is_some() {
            cfg.max_iterations = a.max_iterations;
        }
        if let Some(b) = a.sql_only {
            cfg.sql_only = b;
        }
        if let Some(b) = a.tree_branch_budget {
            cfg.tree_branch_budget = b;
        }
        if let Some(m) = a.max_tokens {
            cfg.max_tokens = m;
        }
        cfg.prompt = PromptOptions { row_cap: a.row_cap };
        cfg
    }

    pub fn sidecar_timeout(&self) -> Duration {
        self.sidecar
            .timeout_secs
            .map(Duration::from_secs_f64)
            .unwrap_or(crate::sidecar::DEFAULT_TIMEOUT)
    }
}
