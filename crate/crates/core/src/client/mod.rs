//! Text-completion backends for the teacher and student roles.

mod log;
mod remote;
mod scripted;

use serde::{Deserialize, Serialize};

pub use log::{record_replay, LogEvent, Logged, SessionLog};
pub use remote::{RemoteClient, RemoteConfig, RetryPolicy, DEFAULT_BODY_TEMPLATE};
pub use scripted::{FixtureEntry, FixtureSet, Match, ScriptedClient, ScriptedFixture};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReasoningEffort {
    Low,
    High,
}

impl ReasoningEffort {
    pub fn as_str(&self) -> &'static str {
        match self {
            ReasoningEffort::Low => "low",
            ReasoningEffort::High => "high",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompletionParams {
    pub temperature: f64,
    pub max_tokens: u32,
    pub reasoning_effort: ReasoningEffort,
    pub model_name: String,
}

impl CompletionParams {
    pub fn teacher() -> Self {
        CompletionParams {
            temperature: 1.0,
            max_tokens: 16384,
            reasoning_effort: ReasoningEffort::High,
            model_name: "gpt-oss-120b".into(),
        }
    }

    pub fn student() -> Self {
        CompletionParams {
            temperature: 1.0,
            max_tokens: 8192,
            reasoning_effort: ReasoningEffort::Low,
            model_name: "gpt-oss-120b".into(),
        }
    }

    pub fn validate(&self) -> Result<(), ClientError> {
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(ClientError::InvalidParams(format!("temperature {} < 0", self.temperature)));
        }
        if self.max_tokens == 0 {
            return Err(ClientError::InvalidParams("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ClientError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("prompt exceeds the model context: {0}")]
    ContextTooLong(String),
    #[error("request rejected with status {status}: {body}")]
    Rejected { status: u16, body: String },
    #[error("malformed backend response: {0}")]
    Malformed(String),
    #[error("invalid completion parameters: {0}")]
    InvalidParams(String),
    #[error("session log line {line}: {msg}")]
    LogCorrupt { line: usize, msg: String },
}

/// A completion backend. Implementations must allow concurrent calls.
pub trait ModelClient: Send + Sync {
    fn complete(&self, prompt: &str, params: &CompletionParams) -> Result<String, ClientError>;

    /// `n` independent completions of the same prompt, in request order.
    fn complete_n(&self, prompt: &str, params: &CompletionParams, n: usize) -> Result<Vec<String>, ClientError> {
        (0..n).map(|_| self.complete(prompt, params)).collect()
    }
}

impl<C: ModelClient + ?Sized> ModelClient for &C {
    fn complete(&self, prompt: &str, params: &CompletionParams) -> Result<String, ClientError> {
        (**self).complete(prompt, params)
    }

    fn complete_n(&self, prompt: &str, params: &CompletionParams, n: usize) -> Result<Vec<String>, ClientError> {
        (**self).complete_n(prompt, params, n)
    }
}

impl<C: ModelClient + ?Sized> ModelClient for Box<C> {
    fn complete(&self, prompt: &str, params: &CompletionParams) -> Result<String, ClientError> {
        (**self).complete(prompt, params)
    }

    fn complete_n(&self, prompt: &str, params: &CompletionParams, n: usize) -> Result<Vec<String>, ClientError> {
        (**self).complete_n(prompt, params, n)
    }
}

impl<C: ModelClient + ?Sized> ModelClient for std::sync::Arc<C> {
    fn complete(&self, prompt: &str, params: &CompletionParams) -> Result<String, ClientError> {
        (**self).complete(prompt, params)
    }

    fn complete_n(&self, prompt: &str, params: &CompletionParams, n: usize) -> Result<Vec<String>, ClientError> {
        (**self).complete_n(prompt, params, n)
    }
}

/// Digest used to key prompts and responses in logs and fixtures.
pub fn text_digest(text: &str) -> String {
    crate::model::sha256_hex(text.as_bytes())
}
