use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Mutex;

use serde_json::Value;

use super::{ChatClient, ChatRequest, LlmError, Stage};

/// Scripted responses keyed by `<stage>:<sha256 of canonical input>`.
///
/// A `<stage>:*` entry answers any request of that stage that has no exact
/// entry. Requests matching neither fail with [`LlmError::UnknownMockKey`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MockScript {
    responses: BTreeMap<String, String>,
}

impl MockScript {
    pub fn new() -> Self {
        Self::default()
    }

    /// Parses a script file body: a JSON object from key to response. String
    /// values are used verbatim; any other JSON value is re-serialized.
    pub fn from_json(text: &str) -> Result<Self, LlmError> {
        let map: BTreeMap<String, Value> = serde_json::from_str(text)
            .map_err(|e| LlmError::Unavailable(format!("invalid mock script: {e}")))?;
        let mut script = MockScript::new();
        for (key, value) in map {
            let (stage, _) = key
                .split_once(':')
                .ok_or_else(|| LlmError::Unavailable(format!("mock key `{key}` lacks a stage prefix")))?;
            stage
                .parse::<Stage>()
                .map_err(|e| LlmError::Unavailable(format!("mock key `{key}`: {e}")))?;
            let text = match value {
                Value::String(s) => s,
                other => other.to_string(),
            };
            script.responses.insert(key, text);
        }
        Ok(script)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.responses).expect("string map serializes")
    }

    /// Adds a response for an exact input.
    pub fn respond(&mut self, stage: Stage, input: &BTreeMap<String, String>, response: impl Into<String>) -> &mut Self {
        let req = ChatRequest {
            stage,
            input: input.clone(),
            prompt: String::new(),
        };
        self.responses.insert(req.script_key(), response.into());
        self
    }

    /// Adds the fallback response for a stage.
    pub fn respond_any(&mut self, stage: Stage, response: impl Into<String>) -> &mut Self {
        self.responses.insert(format!("{stage}:*"), response.into());
        self
    }

    pub fn insert_raw(&mut self, key: impl Into<String>, response: impl Into<String>) -> &mut Self {
        self.responses.insert(key.into(), response.into());
        self
    }

    pub fn lookup(&self, request: &ChatRequest) -> Option<&str> {
        self.responses
            .get(&request.script_key())
            .or_else(|| self.responses.get(&format!("{}:*", request.stage)))
            .map(String::as_str)
    }
}

/// Replays a [`MockScript`] and records every key it was asked for.
#[derive(Debug, Default)]
pub struct MockClient {
    script: MockScript,
    calls: Mutex<Vec<String>>,
}

impl MockClient {
    pub fn new(script: MockScript) -> Self {
        MockClient {
            script,
            calls: Mutex::new(Vec::new()),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, LlmError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LlmError::Unavailable(format!("{}: {e}", path.display())))?;
        Ok(MockClient::new(MockScript::from_json(&text)?))
    }

    /// Keys requested so far, in call order.
    pub fn calls(&self) -> Vec<String> {
        self.calls.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn call_count(&self) -> usize {
        self.calls.lock().unwrap_or_else(|e| e.into_inner()).len()
    }
}

impl ChatClient for MockClient {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        let key = request.script_key();
        self.calls.lock().unwrap_or_else(|e| e.into_inner()).push(key.clone());
        self.script
            .lookup(request)
            .map(str::to_string)
            .ok_or_else(|| LlmError::UnknownMockKey {
                key,
                input: request.canonical_input(),
            })
    }
}
