//! Chat-completion backends.
//!
//! The agent talks to the model through [`CompletionBackend`]. Two
//! implementations ship: [`HttpBackend`] for any endpoint speaking the
//! chat-completions wire shape, and [`ScriptedSession`] which replays a
//! fixed list of replies so agent runs are reproducible in tests.

mod http;
mod scripted;

pub use http::{
    BackendConfig, HttpBackend, HttpResponse, ReqwestTransport, Transport, TransportError,
    DEFAULT_API_KEY_ENV,
};
pub use scripted::{load_script, scripted_complete, Script, ScriptedExchange, ScriptedSession};

use serde::{Deserialize, Serialize};
use thiserror::Error;

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

/// A single request to a chat-completion backend.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompletionRequest {
    pub messages: Vec<ChatMessage>,
    pub model_id: String,
    pub temperature: f32,
    pub max_tokens: u32,
    pub stop_sequences: Vec<String>,
}

impl CompletionRequest {
    pub fn new(messages: Vec<ChatMessage>, model_id: impl Into<String>) -> Self {
        Self {
            messages,
            model_id: model_id.into(),
            temperature: 0.0,
            max_tokens: 1024,
            stop_sequences: Vec::new(),
        }
    }

    pub fn with_stop(mut self, stop: impl Into<String>) -> Self {
        self.stop_sequences.push(stop.into());
        self
    }

    /// Checks the structural invariants: non-empty message list led by a
    /// system message, non-empty user/assistant content, temperature in
    /// `[0, 2]`, positive token budget.
    pub fn validate(&self) -> Result<(), BackendError> {
        let first = self
            .messages
            .first()
            .ok_or_else(|| BackendError::InvalidRequest("no messages".into()))?;
        if first.role != Role::System {
            return Err(BackendError::InvalidRequest(
                "first message must be a system message".into(),
            ));
        }
        if let Some(m) = self
            .messages
            .iter()
            .find(|m| m.role != Role::System && m.content.trim().is_empty())
        {
            return Err(BackendError::InvalidRequest(format!(
                "empty {:?} message",
                m.role
            )));
        }
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(BackendError::InvalidRequest(format!(
                "temperature {} outside [0, 2]",
                self.temperature
            )));
        }
        if self.max_tokens == 0 {
            return Err(BackendError::InvalidRequest("max_tokens must be positive".into()));
        }
        Ok(())
    }

    /// Content of the most recent user message, or `""` when there is none.
    pub fn latest_user_content(&self) -> &str {
        self.messages
            .iter()
            .rev()
            .find(|m| m.role == Role::User)
            .map(|m| m.content.as_str())
            .unwrap_or("")
    }
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("network error: {0}")]
    Network(String),
    #[error("authentication rejected (HTTP {status})")]
    Auth { status: u16 },
    #[error("rate limited after {attempts} attempt(s)")]
    RateLimited { attempts: u32 },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("API key not found in environment variable {0}")]
    MissingApiKey(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid backend config: {0}")]
    InvalidConfig(String),
    #[error("script exhausted after {len} exchange(s)")]
    ScriptExhausted { len: usize },
    #[error("script entry {index} expected {expected:?} in the latest user message")]
    ExpectationMismatch { index: usize, expected: String },
}

/// Anything that can turn a [`CompletionRequest`] into assistant text.
///
/// Implementations take `&mut self` so per-session state (a script cursor)
/// can live in the session value owned by the caller.
pub trait CompletionBackend {
    fn complete(&mut self, request: &CompletionRequest) -> Result<String, BackendError>;

    /// Model identifier placed in requests built for this backend.
    fn model_id(&self) -> &str {
        "scripted"
    }
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for &mut B {
    fn complete(&mut self, request: &CompletionRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }

    fn model_id(&self) -> &str {
        (**self).model_id()
    }
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for Box<B> {
    fn complete(&mut self, request: &CompletionRequest) -> Result<String, BackendError> {
        (**self).complete(request)
    }

    fn model_id(&self) -> &str {
        (**self).model_id()
    }
}

/// Cuts `text` at the earliest occurrence of any stop sequence.
pub fn truncate_at_stop(text: &str, stops: &[String]) -> String {
    let cut = stops
        .iter()
        .filter(|s| !s.is_empty())
        .filter_map(|s| text.find(s.as_str()))
        .min()
        .unwrap_or(text.len());
    text[..cut].to_string()
}
