//! Prompt-stage orchestration over a pluggable chat-completion client.
//!
//! Every stage renders a versioned template, asks for JSON, and validates
//! what comes back. Filtering stages never let the model introduce items:
//! anything that does not map back onto the candidate input is dropped and
//! reported as a warning.

mod http;
mod mock;
mod prompts;
pub(crate) mod stages;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Condvar, Mutex};

use serde::{Deserialize, Serialize};

pub use http::HttpChatClient;
pub use mock::{MockClient, MockScript};
pub use prompts::{PromptSet, PROMPT_VERSION};
pub use stages::{
    filter_metrics, filter_risks, generate_indexes, generate_plan, generate_ux_outcome,
    suggest_index_values, FilteredRisk, PlanMetric, Provenance, RiskCandidate, UxOutcome,
    MAX_SUGGESTIONS_PER_CATEGORY,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LlmError {
    #[error("language model unavailable: {0}")]
    Unavailable(String),
    #[error("mock script has no response for `{key}` (input: {input})")]
    UnknownMockKey { key: String, input: String },
    #[error("{stage}: unparseable model output: {message}")]
    UnparseableOutput { stage: Stage, message: String },
    #[error("prompt template error: {0}")]
    Template(String),
    #[error("precondition failed: {0}")]
    Precondition(String),
}

/// The prompt stages of the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    GenerateIndexes,
    SuggestIndexValues,
    FilterMetrics,
    FilterRisks,
    GeneratePlan,
    GenerateUxOutcome,
    AnnotatePaper,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::GenerateIndexes,
        Stage::SuggestIndexValues,
        Stage::FilterMetrics,
        Stage::FilterRisks,
        Stage::GeneratePlan,
        Stage::GenerateUxOutcome,
        Stage::AnnotatePaper,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::GenerateIndexes => "generate_indexes",
            Stage::SuggestIndexValues => "suggest_index_values",
            Stage::FilterMetrics => "filter_metrics",
            Stage::FilterRisks => "filter_risks",
            Stage::GeneratePlan => "generate_plan",
            Stage::GenerateUxOutcome => "generate_ux_outcome",
            Stage::AnnotatePaper => "annotate_paper",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown stage `{s}`"))
    }
}

/// One dispatch to the model: the stage, its named inputs, and the rendered prompt.
#[derive(Debug, Clone)]
pub struct ChatRequest {
    pub stage: Stage,
    pub input: BTreeMap<String, String>,
    pub prompt: String,
}

impl ChatRequest {
    /// Canonical input: the JSON object of the named inputs with sorted keys.
    pub fn canonical_input(&self) -> String {
        serde_json::to_string(&self.input).expect("string map serializes")
    }

    /// `<stage>:<sha256 of canonical input>`, the key mock scripts are indexed by.
    pub fn script_key(&self) -> String {
        format!(
            "{}:{}",
            self.stage,
            crate::util::sha256_hex(self.canonical_input().as_bytes())
        )
    }
}

pub trait ChatClient: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError>;
}

/// Bounds the number of in-flight calls through the wrapped client.
pub struct Limited<C> {
    inner: C,
    max_in_flight: usize,
    in_flight: Mutex<usize>,
    freed: Condvar,
}

impl<C: ChatClient> Limited<C> {
    pub fn new(inner: C, max_in_flight: usize) -> Self {
        Limited {
            inner,
            max_in_flight: max_in_flight.max(1),
            in_flight: Mutex::new(0),
            freed: Condvar::new(),
        }
    }
}

impl<C: ChatClient> ChatClient for Limited<C> {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        {
            let mut n = self.in_flight.lock().unwrap_or_else(|e| e.into_inner());
            while *n >= self.max_in_flight {
                n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
            }
            *n += 1;
        }
        let result = self.inner.complete(request);
        *self.in_flight.lock().unwrap_or_else(|e| e.into_inner()) -= 1;
        self.freed.notify_one();
        result
    }
}

/// Client configuration block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClientConfig {
    pub kind: ClientKind,
    /// Mock script path (kind = mock).
    pub script: Option<std::path::PathBuf>,
    pub endpoint: Option<String>,
    pub model: Option<String>,
    pub api_key_env: Option<String>,
    pub temperature: f64,
    pub max_retries: usize,
    pub timeout_secs: u64,
    pub max_in_flight: usize,
    /// Directory with `<stage>.txt` files overriding the bundled templates.
    pub prompt_dir: Option<std::path::PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClientKind {
    Mock,
    Http,
}

pub const DEFAULT_TEMPERATURE: f64 = 0.7;

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            kind: ClientKind::Mock,
            script: None,
            endpoint: None,
            model: None,
            api_key_env: None,
            temperature: DEFAULT_TEMPERATURE,
            max_retries: 2,
            timeout_secs: 60,
            max_in_flight: 4,
            prompt_dir: None,
        }
    }
}

/// A client plus the prompt set and retry budget every stage shares.
#[derive(Clone)]
pub struct Llm {
    pub client: Arc<dyn ChatClient>,
    pub prompts: Arc<PromptSet>,
    pub max_retries: usize,
}

impl Llm {
    pub fn new(client: Arc<dyn ChatClient>) -> Self {
        Llm {
            client,
            prompts: Arc::new(PromptSet::default()),
            max_retries: ClientConfig::default().max_retries,
        }
    }

    pub fn with_max_retries(mut self, max_retries: usize) -> Self {
        self.max_retries = max_retries;
        self
    }

    pub fn from_config(cfg: &ClientConfig) -> Result<Self, LlmError> {
        let client: Arc<dyn ChatClient> = match cfg.kind {
            ClientKind::Mock => {
                let path = cfg
                    .script
                    .as_ref()
                    .ok_or_else(|| LlmError::Unavailable("mock client needs a script path".into()))?;
                Arc::new(Limited::new(MockClient::from_file(path)?, cfg.max_in_flight))
            }
            ClientKind::Http => Arc::new(Limited::new(HttpChatClient::from_config(cfg)?, cfg.max_in_flight)),
        };
        let prompts = match &cfg.prompt_dir {
            Some(dir) => PromptSet::with_overrides(dir)?,
            None => PromptSet::default(),
        };
        Ok(Llm {
            client,
            prompts: Arc::new(prompts),
            max_retries: cfg.max_retries,
        })
    }

    pub(crate) fn session(&self) -> CallBudget<'_> {
        CallBudget {
            llm: self,
            remaining: 1 + self.max_retries,
            calls: 0,
        }
    }
}

/// A structured warning raised by a stage (dropped items, failed postconditions).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageWarning {
    pub stage: Stage,
    pub code: String,
    pub message: String,
}

impl StageWarning {
    pub fn new(stage: Stage, code: &str, message: impl Into<String>) -> Self {
        let w = StageWarning {
            stage,
            code: code.into(),
            message: message.into(),
        };
        log::warn!("{}: {}: {}", w.stage, w.code, w.message);
        w
    }
}

/// Calls made for one operation; the total never exceeds `1 + max_retries`.
pub(crate) struct CallBudget<'a> {
    llm: &'a Llm,
    remaining: usize,
    pub calls: usize,
}

impl CallBudget<'_> {
    pub fn remaining(&self) -> usize {
        self.remaining
    }

    /// Dispatches `input` to `stage`, extracts JSON and hands it to `parse`,
    /// re-prompting with the error while the budget lasts.
    pub fn call_with<T>(
        &mut self,
        stage: Stage,
        mut input: BTreeMap<String, String>,
        parse: impl Fn(&serde_json::Value) -> Result<T, String>,
    ) -> Result<T, LlmError> {
        let mut last_err = None;
        while self.remaining > 0 {
            self.remaining -= 1;
            self.calls += 1;
            let prompt = self.llm.prompts.render(stage, &input)?;
            let request = ChatRequest {
                stage,
                input: input.clone(),
                prompt,
            };
            match self.llm.client.complete(&request) {
                Ok(raw) => match extract_json(&raw).and_then(|v| parse(&v)) {
                    Ok(v) => return Ok(v),
                    Err(message) => {
                        input.insert(
                            "format_error".into(),
                            format!(
                                "The previous reply could not be used ({message}). Reply with JSON in the requested shape only."
                            ),
                        );
                        last_err = Some(LlmError::UnparseableOutput { stage, message });
                    }
                },
                Err(e @ LlmError::Unavailable(_)) => last_err = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(last_err.unwrap_or_else(|| LlmError::Unavailable("retry budget exhausted".into())))
    }
}

/// Pulls a JSON value out of a model reply, tolerating code fences and prose around it.
pub fn extract_json(raw: &str) -> Result<serde_json::Value, String> {
    let trimmed = raw.trim();
    if let Ok(v) = serde_json::from_str(trimmed) {
        return Ok(v);
    }
    let unfenced = trimmed
        .strip_prefix("```json")
        .or_else(|| trimmed.strip_prefix("```"))
        .and_then(|s| s.trim_end().strip_suffix("```"))
        .map(str::trim);
    if let Some(inner) = unfenced {
        if let Ok(v) = serde_json::from_str(inner) {
            return Ok(v);
        }
    }
    let start = trimmed.find(['{', '[']);
    let end = trimmed.rfind(['}', ']']);
    match (start, end) {
        (Some(s), Some(e)) if e > s => {
            serde_json::from_str(&trimmed[s..=e]).map_err(|err| err.to_string())
        }
        _ => Err("no JSON object or array found".into()),
    }
}
