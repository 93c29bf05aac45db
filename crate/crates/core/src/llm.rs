//! Completion requests and the backend abstraction.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Stops the model before it writes executor output or a new episode.
pub const DEFAULT_STOP: [&str; 2] = ["Intermediate table", "\n\nThe database table"];
pub const DEFAULT_MAX_TOKENS: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub temperature: f64,
    pub n: usize,
    pub stop: Vec<String>,
    pub max_tokens: usize,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>, temperature: f64, n: usize) -> CompletionRequest {
        CompletionRequest {
            prompt: prompt.into(),
            temperature,
            n,
            stop: DEFAULT_STOP.iter().map(|s| s.to_string()).collect(),
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }

    pub fn validate(&self) -> Result<(), BackendError> {
        if self.n == 0 {
            return Err(BackendError::InvalidRequest("n must be at least 1".into()));
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
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    /// Sum of token log-probabilities; absent when the backend does not
    /// expose them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_prob: Option<f64>,
}

impl Completion {
    pub fn new(text: impl Into<String>, log_prob: Option<f64>) -> Completion {
        Completion {
            text: text.into(),
            log_prob,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("network error: {0}")]
    Network(String),
    #[error("rate limited")]
    RateLimited { retry_after_ms: Option<u64> },
    #[error("no cached completion for request {hash}")]
    CacheMiss { hash: String },
    #[error("backend protocol error: {0}")]
    Protocol(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("backend returned {got} completions, expected {expected}")]
    WrongCount { expected: usize, got: usize },
    #[error("{0}")]
    Other(String),
}

/// A source of sampled completions. Implementations must be safe to share.
pub trait CompletionBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<Completion>, BackendError>;
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for &B {
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<Completion>, BackendError> {
        (**self).complete(request)
    }
}

impl<B: CompletionBackend + ?Sized> CompletionBackend for alloc::boxed::Box<B> {
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<Completion>, BackendError> {
        (**self).complete(request)
    }
}

/// Validates the request, calls the backend, and enforces the contract:
/// exactly `n` completions, each cut at its first stop string.
pub fn complete(
    backend: &(impl CompletionBackend + ?Sized),
    request: &CompletionRequest,
) -> Result<Vec<Completion>, BackendError> {
    request.validate()?;
    let mut completions = backend.complete(request)?;
    if completions.len() != request.n {
        return Err(BackendError::WrongCount {
            expected: request.n,
            got: completions.len(),
        });
    }
    for c in &mut completions {
        let cut = truncate_at_stop(&c.text, &request.stop).len();
        c.text.truncate(cut);
    }
    Ok(completions)
}

pub fn truncate_at_stop<'a>(text: &'a str, stop: &[String]) -> &'a str {
    let end = stop
        .iter()
        .filter(|s| !s.is_empty())
        .filter_map(|s| text.find(s.as_str()))
        .min()
        .unwrap_or(text.len());
    &text[..end]
}
