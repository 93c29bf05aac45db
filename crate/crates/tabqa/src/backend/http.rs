//! Blocking client for completions-style and chat-style JSON APIs.

use std::thread;
use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Value};
use tabqa_core::{BackendError, Completion, CompletionBackend, CompletionRequest};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApiStyle {
    /// `POST {endpoint}/completions`, with per-token log-probabilities.
    Completions,
    /// `POST {endpoint}/chat/completions`; no log-probabilities.
    Chat,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub max_attempts: u32,
    pub base_delay: Duration,
    pub max_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_attempts: 5,
            base_delay: Duration::from_millis(500),
            max_delay: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    fn backoff(&self, attempt: u32) -> Duration {
        self.base_delay
            .saturating_mul(1u32 << attempt.min(16))
            .min(self.max_delay)
    }
}

pub struct HttpBackend {
    url: String,
    model: String,
    api_key: Option<String>,
    style: ApiStyle,
    agent: ureq::Agent,
    retry: RetryPolicy,
}

impl HttpBackend {
    pub fn new(endpoint: &str, model: &str, api_key: Option<String>, style: ApiStyle) -> HttpBackend {
        let path = match style {
            ApiStyle::Completions => "completions",
            ApiStyle::Chat => "chat/completions",
        };
        HttpBackend {
            url: format!("{}/{path}", endpoint.trim_end_matches('/')),
            model: model.to_string(),
            api_key,
            style,
            agent: ureq::AgentBuilder::new().timeout(Duration::from_secs(120)).build(),
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> HttpBackend {
        self.retry = retry;
        self
    }

    fn body(&self, request: &CompletionRequest) -> Value {
        let mut body = json!({
            "model": self.model,
            "temperature": request.temperature,
            "n": request.n,
            "max_tokens": request.max_tokens,
        });
        if !request.stop.is_empty() {
            body["stop"] = json!(request.stop);
        }
        match self.style {
            ApiStyle::Completions => {
                body["prompt"] = json!(request.prompt);
                body["logprobs"] = json!(1);
            }
            ApiStyle::Chat => {
                body["messages"] = json!([{ "role": "user", "content": request.prompt }]);
            }
        }
        body
    }

    fn send(&self, body: &Value) -> Result<String, (BackendError, bool)> {
        let mut call = self.agent.post(&self.url).set("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            call = call.set("Authorization", &format!("Bearer {key}"));
        }
        match call.send_json(body) {
            Ok(resp) => resp
                .into_string()
                .map_err(|e| (BackendError::Network(e.to_string()), true)),
            Err(ureq::Error::Status(429, resp)) => {
                let retry_after_ms = resp
                    .header("Retry-After")
                    .and_then(|v| v.trim().parse::<f64>().ok())
                    .map(|secs| (secs * 1000.0) as u64);
                Err((BackendError::RateLimited { retry_after_ms }, true))
            }
            Err(ureq::Error::Status(code, resp)) if code >= 500 => {
                let text = resp.into_string().unwrap_or_default();
                Err((BackendError::Network(format!("HTTP {code}: {text}")), true))
            }
            Err(ureq::Error::Status(code, resp)) => {
                let text = resp.into_string().unwrap_or_default();
                Err((BackendError::Protocol(format!("HTTP {code}: {text}")), false))
            }
            Err(ureq::Error::Transport(t)) => Err((BackendError::Network(t.to_string()), true)),
        }
    }
}

#[derive(Deserialize)]
struct LogProbs {
    #[serde(default)]
    token_logprobs: Vec<Option<f64>>,
}

#[derive(Deserialize)]
struct Message {
    #[serde(default)]
    content: Option<String>,
}

#[derive(Deserialize)]
struct Choice {
    #[serde(default)]
    index: usize,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    message: Option<Message>,
    #[serde(default)]
    logprobs: Option<LogProbs>,
}

#[derive(Deserialize)]
struct Response {
    choices: Vec<Choice>,
}

/// Parses a response body. Log-probabilities are the sum over tokens and
/// only reported when the body carries them.
pub fn parse_response(body: &str, style: ApiStyle) -> Result<Vec<Completion>, BackendError> {
    let mut parsed: Response =
        serde_json::from_str(body).map_err(|e| BackendError::Protocol(format!("bad response body: {e}")))?;
    parsed.choices.sort_by_key(|c| c.index);
    parsed
        .choices
        .into_iter()
        .map(|c| {
            let text = match style {
                ApiStyle::Completions => c.text,
                ApiStyle::Chat => c.message.and_then(|m| m.content),
            }
            .ok_or_else(|| BackendError::Protocol("choice without text".into()))?;
            let log_prob = match style {
                ApiStyle::Completions => c.logprobs.map(|lp| lp.token_logprobs.iter().flatten().sum()),
                ApiStyle::Chat => None,
            };
            Ok(Completion { text, log_prob })
        })
        .collect()
}

impl CompletionBackend for HttpBackend {
    fn complete(&self, request: &CompletionRequest) -> Result<Vec<Completion>, BackendError> {
        let body = self.body(request);
        let mut attempt = 0;
        loop {
            match self.send(&body) {
                Ok(text) => return parse_response(&text, self.style),
                Err((err, retryable)) => {
                    attempt += 1;
                    if !retryable || attempt >= self.retry.max_attempts {
                        return Err(err);
                    }
                    let mut delay = self.retry.backoff(attempt - 1);
                    if let BackendError::RateLimited {
                        retry_after_ms: Some(ms),
                    } = err
                    {
                        delay = delay.max(Duration::from_millis(ms)).min(self.retry.max_delay);
                    }
                    thread::sleep(delay);
                }
            }
        }
    }
}
