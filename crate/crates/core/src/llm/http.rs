use std::time::Duration;

use serde_json::json;

use super::{ChatClient, ChatRequest, ClientConfig, LlmError};

const SYSTEM_PROMPT: &str =
    "You are an assistant for UX researchers. Always answer with the JSON shape requested.";

/// Chat-completions style client (`POST {endpoint}` with `{model, temperature, messages}`).
pub struct HttpChatClient {
    endpoint: String,
    model: String,
    temperature: f64,
    api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpChatClient {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>, temperature: f64, api_key: Option<String>, timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .build()
            .into();
        HttpChatClient {
            endpoint: endpoint.into(),
            model: model.into(),
            temperature,
            api_key,
            agent,
        }
    }

    pub fn from_config(cfg: &ClientConfig) -> Result<Self, LlmError> {
        let endpoint = cfg
            .endpoint
            .clone()
            .ok_or_else(|| LlmError::Unavailable("http client needs an endpoint".into()))?;
        let api_key = cfg.api_key_env.as_deref().and_then(|k| std::env::var(k).ok());
        Ok(HttpChatClient::new(
            endpoint,
            cfg.model.clone().unwrap_or_default(),
            cfg.temperature,
            api_key,
            Duration::from_secs(cfg.timeout_secs),
        ))
    }

    pub fn request_body(&self, request: &ChatRequest) -> serde_json::Value {
        json!({
            "model": self.model,
            "temperature": self.temperature,
            "messages": [
                {"role": "system", "content": SYSTEM_PROMPT},
                {"role": "user", "content": request.prompt},
            ],
        })
    }
}

impl ChatClient for HttpChatClient {
    fn complete(&self, request: &ChatRequest) -> Result<String, LlmError> {
        let mut req = self.agent.post(&self.endpoint);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(&self.request_body(request))
            .map_err(|e| LlmError::Unavailable(e.to_string()))?;
        let value: serde_json::Value = resp
            .body_mut()
            .read_json()
            .map_err(|e| LlmError::Unavailable(e.to_string()))?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| LlmError::Unavailable("response lacks choices[0].message.content".into()))
    }
}
