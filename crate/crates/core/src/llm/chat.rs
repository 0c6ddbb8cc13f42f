use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{whitespace_units, ChatMessage, Generation, GenerationRequest, LanguageModel, LlmError};

pub const LLM_API_KEY_ENV: &str = "LLM_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub initial_backoff_ms: u64,
    pub max_backoff_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            initial_backoff_ms: 500,
            max_backoff_ms: 8_000,
        }
    }
}

impl RetryPolicy {
    fn backoff(&self, attempt: u32) -> Duration {
        let ms = self
            .initial_backoff_ms
            .saturating_mul(1u64 << attempt.min(16))
            .min(self.max_backoff_ms);
        Duration::from_millis(ms)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatClientConfig {
    /// Full URL of the chat-completions route.
    pub endpoint: String,
    pub model: String,
    /// Falls back to the `LLM_API_KEY` environment variable.
    #[serde(default, skip_serializing)]
    pub api_key: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: f64,
    #[serde(default)]
    pub retry: RetryPolicy,
    /// Sends `continue_final_message` / `add_generation_prompt` hints when the
    /// last message is a partial assistant turn.
    #[serde(default = "default_true")]
    pub continue_final_message: bool,
}

fn default_timeout_secs() -> f64 {
    120.0
}

fn default_true() -> bool {
    true
}

impl ChatClientConfig {
    pub fn new(endpoint: impl Into<String>, model: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            model: model.into(),
            api_key: None,
            timeout_secs: default_timeout_secs(),
            retry: RetryPolicy::default(),
            continue_final_message: true,
        }
    }
}

/// Chat-completions client with stop sequences and retry with exponential backoff.
pub struct ChatClient {
    config: ChatClientConfig,
    api_key: Option<String>,
    http: reqwest::Client,
}

#[derive(Debug, Serialize)]
struct ChatBody<'a> {
    model: &'a str,
    messages: &'a [ChatMessage],
    stop: &'a [String],
    temperature: f64,
    top_p: f64,
    max_tokens: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    continue_final_message: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    add_generation_prompt: Option<bool>,
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    #[serde(default)]
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<Usage>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    #[serde(default)]
    message: Option<ResponseMessage>,
    #[serde(default)]
    finish_reason: Option<String>,
    /// vLLM reports the matched stop string here.
    #[serde(default)]
    stop_reason: Option<Value>,
}

#[derive(Debug, Deserialize)]
struct ResponseMessage {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Debug, Deserialize)]
struct Usage {
    #[serde(default)]
    completion_tokens: Option<usize>,
}

impl ChatClient {
    pub fn new(config: ChatClientConfig) -> Result<Self, LlmError> {
        let api_key = config
            .api_key
            .clone()
            .or_else(|| std::env::var(LLM_API_KEY_ENV).ok())
            .filter(|k| !k.is_empty());
        let http = reqwest::Client::builder()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build()
            .map_err(|e| LlmError::Transport(e.to_string()))?;
        Ok(Self {
            config,
            api_key,
            http,
        })
    }

    async fn attempt(&self, request: &GenerationRequest) -> Result<Generation, LlmError> {
        let continuing = self.config.continue_final_message && request.continues_assistant();
        let body = ChatBody {
            model: &self.config.model,
            messages: &request.messages,
            stop: &request.stop,
            temperature: request.temperature,
            top_p: request.top_p,
            max_tokens: request.max_tokens,
            seed: request.seed,
            continue_final_message: continuing.then_some(true),
            add_generation_prompt: continuing.then_some(false),
        };
        let mut call = self.http.post(&self.config.endpoint).json(&body);
        if let Some(key) = &self.api_key {
            call = call.bearer_auth(key);
        }
        let response = call.send().await.map_err(map_transport)?;
        let status = response.status();
        if !status.is_success() {
            let body = response.text().await.unwrap_or_default();
            return Err(LlmError::Status {
                status: status.as_u16(),
                body: body.chars().take(500).collect(),
            });
        }
        let parsed: ChatResponse = response
            .json()
            .await
            .map_err(|e| LlmError::InvalidResponse(e.to_string()))?;
        interpret(parsed, &request.stop)
    }
}

fn map_transport(e: reqwest::Error) -> LlmError {
    if e.is_timeout() {
        LlmError::Timeout
    } else {
        LlmError::Transport(e.to_string())
    }
}

fn interpret(parsed: ChatResponse, stops: &[String]) -> Result<Generation, LlmError> {
    let choice = parsed
        .choices
        .into_iter()
        .next()
        .ok_or_else(|| LlmError::InvalidResponse("no choices".into()))?;
    let mut text = choice
        .message
        .and_then(|m| m.content)
        .unwrap_or_default();

    let reported = match &choice.stop_reason {
        Some(Value::String(s)) if stops.contains(s) => Some(s.clone()),
        _ => None,
    };
    // Some servers keep the stop string in the output.
    let kept = stops
        .iter()
        .find(|s| !s.is_empty() && text.ends_with(s.as_str()))
        .cloned();
    if let Some(s) = &kept {
        text.truncate(text.len() - s.len());
    }
    let stop = reported.or(kept).or_else(|| {
        if choice.finish_reason.as_deref() == Some("stop") {
            infer_stop(&text, stops)
        } else {
            None
        }
    });
    let units = parsed
        .usage
        .and_then(|u| u.completion_tokens)
        .unwrap_or_else(|| whitespace_units(&text));
    Ok(Generation { text, stop, units })
}

/// Picks the closing stop whose opening tag is still open at the end of
/// `text`, preferring the most recently opened one.
fn infer_stop(text: &str, stops: &[String]) -> Option<String> {
    stops
        .iter()
        .filter_map(|stop| {
            let open = stop.strip_prefix("</").map(|name| format!("<{name}"))?;
            let opened = text.rfind(&open)?;
            let closed = text.rfind(stop.as_str());
            (closed.is_none_or(|c| c < opened)).then_some((opened, stop.clone()))
        })
        .max_by_key(|(at, _)| *at)
        .map(|(_, s)| s)
}

#[async_trait]
impl LanguageModel for ChatClient {
    async fn generate(&self, request: &GenerationRequest) -> Result<Generation, LlmError> {
        let policy = self.config.retry;
        let mut attempt = 0;
        loop {
            match self.attempt(request).await {
                Ok(g) => return Ok(g),
                Err(e) if e.is_retryable() && attempt < policy.max_retries => {
                    tracing::warn!(attempt, error = %e, "llm call failed, retrying");
                    tokio::time::sleep(policy.backoff(attempt)).await;
                    attempt += 1;
                }
                Err(e) if attempt > 0 || e.is_retryable() => {
                    return Err(LlmError::Unreachable {
                        attempts: attempt + 1,
                        last: Box::new(e),
                    })
                }
                Err(e) => return Err(e),
            }
        }
    }
}
