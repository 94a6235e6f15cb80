use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::json;

use super::{Backend, BackendKind, ChatRequest, ChatResponse, Role, TokenUsage};
use crate::error::LlmError;

/// Primary environment variable holding the API key.
pub const API_KEY_ENV: &str = "RFC_AUDIT_API_KEY";
/// Consulted when [`API_KEY_ENV`] is unset.
pub const API_KEY_ENV_FALLBACK: &str = "ANTHROPIC_API_KEY";

#[derive(Debug, Clone)]
pub struct LiveConfig {
    pub api_base: String,
    pub timeout: Duration,
}

impl Default for LiveConfig {
    fn default() -> Self {
        LiveConfig {
            api_base: "https://api.anthropic.com".into(),
            timeout: Duration::from_secs(300),
        }
    }
}

/// Messages-API backend. The key is read from the environment only.
pub struct LiveBackend {
    http: reqwest::blocking::Client,
    config: LiveConfig,
    api_key: String,
}

impl LiveBackend {
    pub fn from_env(config: LiveConfig) -> Result<Self, LlmError> {
        let api_key = std::env::var(API_KEY_ENV)
            .or_else(|_| std::env::var(API_KEY_ENV_FALLBACK))
            .map_err(|_| {
                LlmError::Config(format!(
                    "set {API_KEY_ENV} (or {API_KEY_ENV_FALLBACK}) for the live backend"
                ))
            })?;
        let http = reqwest::blocking::Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| LlmError::Config(e.to_string()))?;
        Ok(LiveBackend { http, config, api_key })
    }
}

#[derive(Deserialize)]
struct ApiResponse {
    content: Vec<ApiBlock>,
    usage: ApiUsage,
}

#[derive(Deserialize)]
struct ApiBlock {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default)]
    text: String,
}

#[derive(Deserialize)]
struct ApiUsage {
    input_tokens: u64,
    output_tokens: u64,
}

/// Request body. Tool schemas are part of the prompt protocol (fenced JSON
/// replies), so they are not sent as API-level tools.
pub(crate) fn api_body(req: &ChatRequest) -> serde_json::Value {
    let messages: Vec<_> = req
        .messages
        .iter()
        .map(|m| {
            json!({
                "role": match m.role { Role::User => "user", Role::Assistant => "assistant" },
                "content": m.content,
            })
        })
        .collect();
    json!({
        "model": req.model_tag,
        "max_tokens": req.max_output_tokens,
        "temperature": req.temperature(),
        "system": req.system,
        "messages": messages,
    })
}

impl Backend for LiveBackend {
    fn kind(&self) -> BackendKind {
        BackendKind::Live
    }

    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let started = Instant::now();
        let url = format!("{}/v1/messages", self.config.api_base.trim_end_matches('/'));
        let resp = self
            .http
            .post(url)
            .header("x-api-key", &self.api_key)
            .header("anthropic-version", "2023-06-01")
            .json(&api_body(request))
            .send()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp.text().map_err(|e| LlmError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(LlmError::Http {
                status: status.as_u16(),
                body: text.chars().take(2000).collect(),
            });
        }
        let parsed: ApiResponse =
            serde_json::from_str(&text).map_err(|e| LlmError::Protocol(format!("response body: {e}")))?;
        let content = parsed
            .content
            .into_iter()
            .filter(|b| b.kind == "text")
            .map(|b| b.text)
            .collect::<Vec<_>>()
            .join("");
        Ok(ChatResponse {
            content,
            usage: TokenUsage {
                input_tokens: parsed.usage.input_tokens,
                output_tokens: parsed.usage.output_tokens,
            },
            latency_ms: started.elapsed().as_millis() as u64,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn body_carries_greedy_temperature() {
        let body = api_body(&ChatRequest::new("p", "model-x", "sys", "hi"));
        assert_eq!(body["temperature"], 0.0);
        assert_eq!(body["model"], "model-x");
        assert_eq!(body["messages"][0]["role"], "user");
        assert!(body.get("tools").is_none());
    }

    /// Live smoke test; runs only when explicitly enabled.
    #[test]
    fn live_smoke() {
        if std::env::var("RFC_AUDIT_LIVE_TESTS").as_deref() != Ok("1") {
            return;
        }
        let model = std::env::var("RFC_AUDIT_LIVE_MODEL").unwrap_or_else(|_| "claude-3-5-sonnet-20241022".into());
        let b = LiveBackend::from_env(LiveConfig::default()).unwrap();
        let r = b
            .complete(&ChatRequest::new("smoke", model, "Answer with one word.", "Say OK."))
            .unwrap();
        assert!(!r.content.is_empty());
        assert!(r.usage.input_tokens > 0);
    }
}
