use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::CorpusPaths;
use crate::embed::{EmbeddingConfig, ProviderKind};
use crate::graph::EdgeWeightConfig;
use crate::llm::{ClientConfig, ClientKind};
use crate::recommend::RiskConfig;

/// Which metrics may enter the cart.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CartPolicy {
    /// Any metric in the corpus repository.
    #[default]
    Corpus,
    /// Only metrics in the session's current recommendation.
    Recommendation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    /// Directory holding `papers.json`, `metrics.json` and `incidents.json`.
    pub corpus_dir: PathBuf,
    pub session_dir: PathBuf,
    pub bind: String,
    pub cart_policy: CartPolicy,
    pub edge_weights: EdgeWeightConfig,
    pub embedding: EmbeddingConfig,
    pub llm: ClientConfig,
    pub risk: RiskConfig,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            corpus_dir: PathBuf::from("corpus"),
            session_dir: PathBuf::from("sessions"),
            bind: "127.0.0.1:8080".into(),
            cart_policy: CartPolicy::default(),
            edge_weights: EdgeWeightConfig::default(),
            embedding: EmbeddingConfig::default(),
            llm: ClientConfig::default(),
            risk: RiskConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("environment variable {name}: {message}")]
    Env { name: String, message: String },
}

impl ServiceConfig {
    /// Reads a TOML file, applies `UXEVAL_*` environment overrides and
    /// resolves relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: ServiceConfig = toml::from_str(&text).map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.apply_env(|name| std::env::var(name).ok())?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn corpus_paths(&self) -> CorpusPaths {
        CorpusPaths::in_dir(&self.corpus_dir)
    }

    /// Makes relative paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus_dir);
        fix(&mut self.session_dir);
        if let Some(p) = self.llm.script.as_mut() {
            fix(p);
        }
        if let Some(p) = self.llm.prompt_dir.as_mut() {
            fix(p);
        }
    }

    /// Overrides fields from `UXEVAL_*` variables looked up through `get`.
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        fn parse<T: std::str::FromStr>(name: &str, v: &str) -> Result<T, ConfigError>
        where
            T::Err: std::fmt::Display,
        {
            v.parse().map_err(|e: T::Err| ConfigError::Env {
                name: name.into(),
                message: e.to_string(),
            })
        }
        let bad = |name: &str, v: &str| ConfigError::Env {
            name: name.into(),
            message: format!("unsupported value `{v}`"),
        };
        if let Some(v) = get("UXEVAL_BIND") {
            self.bind = v;
        }
        if let Some(v) = get("UXEVAL_CORPUS_DIR") {
            self.corpus_dir = v.into();
        }
        if let Some(v) = get("UXEVAL_SESSION_DIR") {
            self.session_dir = v.into();
        }
        if let Some(v) = get("UXEVAL_LLM_KIND") {
            self.llm.kind = match v.as_str() {
                "mock" => ClientKind::Mock,
                "http" => ClientKind::Http,
                _ => return Err(bad("UXEVAL_LLM_KIND", &v)),
            };
        }
        if let Some(v) = get("UXEVAL_LLM_SCRIPT") {
            self.llm.script = Some(v.into());
        }
        if let Some(v) = get("UXEVAL_LLM_ENDPOINT") {
            self.llm.endpoint = Some(v);
        }
        if let Some(v) = get("UXEVAL_LLM_MODEL") {
            self.llm.model = Some(v);
        }
        if let Some(v) = get("UXEVAL_LLM_TEMPERATURE") {
            self.llm.temperature = parse("UXEVAL_LLM_TEMPERATURE", &v)?;
        }
        if let Some(v) = get("UXEVAL_LLM_MAX_IN_FLIGHT") {
            self.llm.max_in_flight = parse("UXEVAL_LLM_MAX_IN_FLIGHT", &v)?;
        }
        if let Some(v) = get("UXEVAL_EMBED_PROVIDER") {
            self.embedding.provider = match v.as_str() {
                "fallback" => ProviderKind::Fallback,
                "http" => ProviderKind::Http,
                _ => return Err(bad("UXEVAL_EMBED_PROVIDER", &v)),
            };
        }
        if let Some(v) = get("UXEVAL_EMBED_ENDPOINT") {
            self.embedding.endpoint = Some(v);
        }
        if let Some(v) = get("UXEVAL_RISK_THRESHOLD") {
            self.risk.threshold = parse("UXEVAL_RISK_THRESHOLD", &v)?;
        }
        if let Some(v) = get("UXEVAL_RISK_TOP_K") {
            self.risk.top_k = parse("UXEVAL_RISK_TOP_K", &v)?;
        }
        Ok(())
    }
}
