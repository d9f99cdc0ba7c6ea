//! HTTP chat-completion backend with token-bucket rate limiting and
//! exponential-backoff retries. The request/response shape follows the de
//! facto chat-completion JSON format, so any compatible server works by
//! pointing `base_url` at it.

use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::json;

use super::{Backend, CompletionParams, LlmDialogue};
use crate::config::{LlmConfig, API_KEY_ENV};
use crate::error::{Error, Result};

pub struct HttpBackend {
    client: reqwest::blocking::Client,
    base_url: String,
    max_retries: u32,
    limiter: Mutex<TokenBucket>,
}

struct TokenBucket {
    interval: Duration,
    next_ready: Instant,
}

impl TokenBucket {
    fn new(rate_per_s: f64) -> Self {
        TokenBucket {
            interval: Duration::from_secs_f64(1.0 / rate_per_s),
            next_ready: Instant::now(),
        }
    }

    /// Blocks until a request slot is available.
    fn acquire(&mut self) {
        let now = Instant::now();
        if now < self.next_ready {
            std::thread::sleep(self.next_ready - now);
        }
        self.next_ready = Instant::now() + self.interval;
    }
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: String,
}

impl HttpBackend {
    pub fn new(config: &LlmConfig) -> Result<Self> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(120))
            .build()
            .map_err(|e| Error::Environment(format!("http client: {e}")))?;
        Ok(HttpBackend {
            client,
            base_url: config.base_url.trim_end_matches('/').to_string(),
            max_retries: config.max_retries,
            limiter: Mutex::new(TokenBucket::new(config.rate_limit_per_s)),
        })
    }

    fn attempt(&self, dialogue: &LlmDialogue, params: &CompletionParams) -> std::result::Result<String, AttemptError> {
        self.limiter.lock().expect("limiter lock").acquire();

        let body = json!({
            "model": params.model_id,
            "messages": dialogue.messages,
            "temperature": params.temperature,
            "max_tokens": params.max_tokens,
        });
        let mut request = self
            .client
            .post(format!("{}/chat/completions", self.base_url))
            .json(&body);
        // The key never appears in config files or logs.
        if let Ok(key) = std::env::var(API_KEY_ENV) {
            request = request.bearer_auth(key);
        }

        let response = request.send().map_err(|e| AttemptError {
            detail: e.to_string(),
            transient: true,
        })?;

        let status = response.status();
        if !status.is_success() {
            return Err(AttemptError {
                detail: format!("http status {status}"),
                transient: status.as_u16() == 429 || status.is_server_error(),
            });
        }

        let parsed: ChatResponse = response.json().map_err(|e| AttemptError {
            detail: format!("malformed completion response: {e}"),
            transient: false,
        })?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or(AttemptError {
                detail: "completion response had no choices".into(),
                transient: false,
            })
    }
}

struct AttemptError {
    detail: String,
    transient: bool,
}

impl Backend for HttpBackend {
    fn complete(&self, dialogue: &LlmDialogue, params: &CompletionParams) -> Result<String> {
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(dialogue, params) {
                Ok(text) => return Ok(text),
                Err(e) if e.transient && attempts <= self.max_retries => {
                    let backoff = Duration::from_millis(500u64.saturating_mul(1 << (attempts - 1)));
                    log::warn!(
                        "llm call failed ({}), retry {attempts}/{} in {backoff:?}",
                        e.detail,
                        self.max_retries
                    );
                    std::thread::sleep(backoff.min(Duration::from_secs(20)));
                }
                Err(e) => {
                    return Err(Error::BackendUnavailable {
                        attempts,
                        detail: e.detail,
                    })
                }
            }
        }
    }

    fn name(&self) -> &'static str {
        "http"
    }
}
