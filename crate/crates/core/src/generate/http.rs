//! Chat-completion client for OpenAI-compatible endpoints.

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::backend::{BackendDescriptor, CompletionRequest, GenerationBackend};
use super::GenError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpBackendConfig {
    pub endpoint: String,
    pub model: String,
    pub temperature: f64,
    /// Environment variable holding the API key.
    pub api_key_env: String,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_timeout_secs() -> u64 {
    60
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    pub n: u32,
    pub temperature: f64,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Debug, Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
}

pub fn build_request(config: &HttpBackendConfig, prompt: &str) -> ChatRequest {
    ChatRequest {
        model: config.model.clone(),
        messages: vec![ChatMessage { role: "user".into(), content: prompt.to_string() }],
        n: 1,
        temperature: config.temperature,
    }
}

/// Extracts the first choice's message content.
pub fn parse_response(body: &Value) -> Result<String, GenError> {
    let response: ChatResponse =
        serde_json::from_value(body.clone()).map_err(|e| GenError::Protocol(format!("unexpected response body: {e}")))?;
    let choice = response.choices.into_iter().next().ok_or_else(|| GenError::Protocol("response has no choices".into()))?;
    Ok(choice.message.content.unwrap_or_default())
}

pub struct HttpChatBackend {
    config: HttpBackendConfig,
    api_key: String,
    client: reqwest::blocking::Client,
    requests: AtomicU64,
}

impl HttpChatBackend {
    /// Reads the API key from the configured environment variable.
    pub fn from_env(config: HttpBackendConfig) -> Result<Self, GenError> {
        let api_key = std::env::var(&config.api_key_env)
            .map_err(|_| GenError::BackendUnavailable(format!("environment variable {} is not set", config.api_key_env)))?;
        Self::new(config, api_key)
    }

    pub fn new(config: HttpBackendConfig, api_key: String) -> Result<Self, GenError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| GenError::BackendUnavailable(e.to_string()))?;
        Ok(Self { config, api_key, client, requests: AtomicU64::new(0) })
    }
}

impl GenerationBackend for HttpChatBackend {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, GenError> {
        self.requests.fetch_add(1, Ordering::Relaxed);
        let body = build_request(&self.config, request.prompt);
        let response = self
            .client
            .post(&self.config.endpoint)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .map_err(|e| GenError::Transport(e.to_string()))?;
        let status = response.status();
        if !status.is_success() {
            let text = response.text().unwrap_or_default();
            return Err(GenError::Transport(format!("HTTP {status}: {}", text.chars().take(200).collect::<String>())));
        }
        let json: Value = response.json().map_err(|e| GenError::Protocol(e.to_string()))?;
        parse_response(&json)
    }

    fn descriptor(&self) -> BackendDescriptor {
        BackendDescriptor::HttpChat {
            endpoint: self.config.endpoint.clone(),
            model: self.config.model.clone(),
            temperature: self.config.temperature,
        }
    }

    fn request_count(&self) -> u64 {
        self.requests.load(Ordering::Relaxed)
    }
}
