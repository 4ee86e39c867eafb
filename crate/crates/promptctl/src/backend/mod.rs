//! The LLM abstraction: prompt in, response out, randomness explicit.
//!
//! Two backends exist: a scripted deterministic mock for offline work and
//! an HTTP client for OpenAI-compatible chat-completion services. Both are
//! driven through [`generate`], and both are pure functions of
//! (prompt, seed, configuration) — the mock exactly, the HTTP backend as
//! far as the remote service allows.

mod http;
mod mock;

pub use http::{http_generate, HttpBackend, HttpConfig};
pub use mock::{script_of, MockOutcome, MockRule, MockScript, MockScriptError};

use serde::{Deserialize, Serialize};

use crate::text::Text;

/// Sampling parameters forwarded to the backend. The mock ignores
/// temperature: its outcome weights already encode the distribution, which
/// keeps its law seed-determined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            temperature: 0.0,
            max_tokens: 256,
        }
    }
}

/// One generation call. The seed carries all randomness; a request replayed
/// against a mock backend yields the identical response.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRequest {
    pub prompt: Text,
    pub seed: u64,
    pub params: GenParams,
}

impl GenerationRequest {
    pub fn new(prompt: impl Into<Text>, seed: u64) -> Self {
        GenerationRequest {
            prompt: prompt.into(),
            seed,
            params: GenParams::default(),
        }
    }
}

/// Declarative backend selection; exactly one kind is populated.
#[derive(Debug, Clone)]
pub enum BackendConfig {
    Mock { script: MockScript },
    Http(HttpConfig),
}

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error("generation contract violated: {0}")]
    Contract(String),
    #[error("transport failure after retries: {0}")]
    Transport(String),
    #[error("backend returned status {0} after retries")]
    Status(u16),
    #[error("protocol error: {0}")]
    Protocol(String),
}

/// A ready-to-call backend built from a [`BackendConfig`].
#[derive(Debug)]
pub enum Backend {
    Mock(MockScript),
    Http(HttpBackend),
}

impl Backend {
    pub fn new(config: BackendConfig) -> Backend {
        match config {
            BackendConfig::Mock { script } => Backend::Mock(script),
            BackendConfig::Http(cfg) => Backend::Http(HttpBackend::new(cfg)),
        }
    }

    /// Identifier recorded in transcripts.
    pub fn id(&self) -> &str {
        match self {
            Backend::Mock(_) => "mock",
            Backend::Http(h) => h.model(),
        }
    }

    pub fn generate(&self, request: &GenerationRequest) -> Result<Text, BackendError> {
        generate(request, self)
    }
}

/// Run one generation. Safe under concurrent invocation: the mock holds no
/// mutable state between calls and the HTTP client bounds in-flight
/// requests internally.
pub fn generate(request: &GenerationRequest, backend: &Backend) -> Result<Text, BackendError> {
    if request.prompt.is_empty() {
        return Err(BackendError::Contract("prompt must be non-empty".into()));
    }
    match backend {
        Backend::Mock(script) => Ok(script.respond(&request.prompt, request.seed)),
        Backend::Http(client) => http_generate(request, client),
    }
}
