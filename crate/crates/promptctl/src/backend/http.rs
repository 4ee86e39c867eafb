//! OpenAI-compatible chat-completions client.
//!
//! Wire format: POST {base_url}/chat/completions with body fields
//! `model`, `messages` (a single user message carrying the whole prompt),
//! `temperature`, `max_tokens`, and `seed` (omitted when `send_seed` is
//! off). The response is read from `choices[0].message.content`.
//! Transport failures and non-2xx statuses are retried up to `max_retries`
//! with exponential backoff starting at 250 ms.

use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::Deserialize;

use super::{BackendError, GenerationRequest};
use crate::text::Text;

const BACKOFF_START_MS: u64 = 250;

#[derive(Debug, Clone)]
pub struct HttpConfig {
    pub base_url: String,
    pub model: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
    /// Upper bound on concurrent in-flight requests.
    pub max_in_flight: usize,
    /// Bearer token, usually from PROMPTCTL_API_KEY.
    pub api_key: Option<String>,
    /// Whether the server accepts a `seed` field.
    pub send_seed: bool,
}

impl HttpConfig {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>) -> HttpConfig {
        HttpConfig {
            base_url: base_url.into(),
            model: model.into(),
            timeout_ms: 30_000,
            max_retries: 2,
            max_in_flight: 8,
            api_key: None,
            send_seed: true,
        }
    }
}

#[derive(Debug)]
pub struct HttpBackend {
    config: HttpConfig,
    agent: ureq::Agent,
    limiter: Semaphore,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> HttpBackend {
        let agent_config = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(config.timeout_ms)))
            .http_status_as_error(false)
            .build();
        let limiter = Semaphore::new(config.max_in_flight.max(1));
        HttpBackend {
            agent: agent_config.new_agent(),
            config,
            limiter,
        }
    }

    pub fn model(&self) -> &str {
        &self.config.model
    }

    fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.config.base_url.trim_end_matches('/'))
    }

    fn request_body(&self, request: &GenerationRequest) -> String {
        let mut body = serde_json::json!({
            "model": self.config.model,
            "messages": [{"role": "user", "content": request.prompt.as_str()}],
            "temperature": request.params.temperature,
            "max_tokens": request.params.max_tokens,
        });
        if self.config.send_seed {
            body["seed"] = serde_json::json!(request.seed);
        }
        body.to_string()
    }

    /// One attempt; `Err` values are retriable, protocol errors are not.
    fn attempt(&self, body: &str) -> Result<Result<Text, BackendError>, AttemptFailure> {
        let mut builder = self
            .agent
            .post(self.endpoint())
            .header("content-type", "application/json");
        if let Some(key) = &self.config.api_key {
            builder = builder.header("authorization", format!("Bearer {key}"));
        }
        let mut response = builder
            .send(body)
            .map_err(|e| AttemptFailure::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(AttemptFailure::Status(status));
        }
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| AttemptFailure::Transport(e.to_string()))?;
        Ok(parse_completion(&text))
    }
}

enum AttemptFailure {
    Transport(String),
    Status(u16),
}

/// Issue one chat-completion call with retries. The in-flight limiter is
/// held across each attempt, not across the backoff sleeps.
pub fn http_generate(
    request: &GenerationRequest,
    backend: &HttpBackend,
) -> Result<Text, BackendError> {
    let body = backend.request_body(request);
    let attempts = backend.config.max_retries + 1;
    let mut backoff = Duration::from_millis(BACKOFF_START_MS);
    let mut last_failure = None;
    for attempt in 0..attempts {
        if attempt > 0 {
            std::thread::sleep(backoff);
            backoff *= 2;
        }
        let _permit = backend.limiter.acquire();
        match backend.attempt(&body) {
            Ok(parsed) => return parsed,
            Err(failure) => last_failure = Some(failure),
        }
    }
    Err(match last_failure {
        Some(AttemptFailure::Status(code)) => BackendError::Status(code),
        Some(AttemptFailure::Transport(msg)) => BackendError::Transport(msg),
        None => BackendError::Transport("no attempts were made".into()),
    })
}

#[derive(Deserialize)]
struct CompletionResponse {
    #[serde(default)]
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: Option<Message>,
}

#[derive(Deserialize)]
struct Message {
    content: Option<String>,
}

fn parse_completion(body: &str) -> Result<Text, BackendError> {
    let parsed: CompletionResponse = serde_json::from_str(body)
        .map_err(|e| BackendError::Protocol(format!("unparseable response body: {e}")))?;
    parsed
        .choices
        .into_iter()
        .next()
        .and_then(|c| c.message)
        .and_then(|m| m.content)
        .map(Text::new)
        .ok_or_else(|| {
            BackendError::Protocol("response has no choices[0].message.content".into())
        })
}

/// Counting semaphore; std has no stable one.
#[derive(Debug)]
struct Semaphore {
    permits: Mutex<usize>,
    available: Condvar,
}

struct Permit<'a>(&'a Semaphore);

impl Semaphore {
    fn new(permits: usize) -> Semaphore {
        Semaphore {
            permits: Mutex::new(permits),
            available: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut permits = self.permits.lock().unwrap();
        while *permits == 0 {
            permits = self.available.wait(permits).unwrap();
        }
        *permits -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut permits = self.0.permits.lock().unwrap();
        *permits += 1;
        self.0.available.notify_one();
    }
}
