//! Language-model clients: the chat-completions HTTP client and a scripted
//! test double, behind one trait.

mod chat;
mod scripted;
mod selection;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use chat::{ChatClient, ChatClientConfig, RetryPolicy, LLM_API_KEY_ENV};
pub use scripted::ScriptedLlm;
pub use selection::parse_selection;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self {
            role: Role::System,
            content: content.into(),
        }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self {
            role: Role::User,
            content: content.into(),
        }
    }

    pub fn assistant(content: impl Into<String>) -> Self {
        Self {
            role: Role::Assistant,
            content: content.into(),
        }
    }
}

/// One generation call. A trailing assistant message is a prefix the model
/// continues rather than a finished turn.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRequest {
    pub messages: Vec<ChatMessage>,
    pub stop: Vec<String>,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: usize,
    pub seed: Option<u64>,
}

impl GenerationRequest {
    /// A single-turn request with greedy-ish defaults, used by the filters.
    pub fn prompt(system: &str, user: String) -> Self {
        Self {
            messages: vec![ChatMessage::system(system), ChatMessage::user(user)],
            stop: Vec::new(),
            temperature: 0.0,
            top_p: 1.0,
            max_tokens: 256,
            seed: None,
        }
    }

    pub fn continues_assistant(&self) -> bool {
        matches!(self.messages.last(), Some(m) if m.role == Role::Assistant)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Generation {
    /// Generated text, excluding the stop sequence that ended it.
    pub text: String,
    /// The stop sequence that ended generation, if any.
    pub stop: Option<String>,
    /// Generation units consumed (completion tokens when the server reports them).
    pub units: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LlmError {
    #[error("server returned HTTP {status}: {body}")]
    Status { status: u16, body: String },
    #[error("request timed out")]
    Timeout,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("invalid response: {0}")]
    InvalidResponse(String),
    #[error("script exhausted")]
    ScriptExhausted,
    #[error("gave up after {attempts} attempts: {last}")]
    Unreachable { attempts: u32, last: Box<LlmError> },
}

impl LlmError {
    pub(crate) fn is_retryable(&self) -> bool {
        match self {
            Self::Status { status, .. } => *status == 429 || *status >= 500,
            Self::Timeout | Self::Transport(_) => true,
            _ => false,
        }
    }
}

#[async_trait]
pub trait LanguageModel: Send + Sync {
    async fn generate(&self, request: &GenerationRequest) -> Result<Generation, LlmError>;
}

/// Finds the earliest stop sequence in `text`: the byte offset where it begins and the sequence.
pub(crate) fn find_stop<'a>(text: &str, stops: &'a [String]) -> Option<(usize, &'a str)> {
    stops
        .iter()
        .filter(|s| !s.is_empty())
        .filter_map(|s| text.find(s.as_str()).map(|at| (at, s.as_str())))
        .min_by_key(|(at, s)| (*at, std::cmp::Reverse(s.len())))
}

pub(crate) fn whitespace_units(text: &str) -> usize {
    text.split_whitespace().count()
}
