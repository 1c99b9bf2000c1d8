//! Chat-completion calls with record/replay cassettes.
//!
//! Cassette files are JSONL, one exchange per line, append-only:
//!
//! ```text
//! {"digest":"…","request":{"model_id":…,"spec_digest":…,"strategy":…,
//!  "temperature":0.0,"max_tokens":2048,"prompt_text":…},"response":{…}}
//! ```
//!
//! A later line for the same digest replaces an earlier one on load.

mod cassette;
mod http;

use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use cassette::{Cassette, CassetteEntry, CassetteMode, RequestSnapshot};
pub use http::{HttpChatBackend, RetryPolicy};

use crate::prompt::RenderedPrompt;
use crate::util::sha256_hex;

pub const DEFAULT_MAX_TOKENS: u32 = 2048;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model_id: String,
    pub prompt: RenderedPrompt,
    /// Sent as a system message when present. None by default.
    pub system: Option<String>,
    pub temperature: f64,
    pub max_tokens: u32,
    pub request_digest: String,
}

impl ChatRequest {
    pub fn new(model_id: impl Into<String>, prompt: RenderedPrompt) -> Self {
        Self::with_params(model_id, prompt, None, 0.0, DEFAULT_MAX_TOKENS)
    }

    pub fn with_params(
        model_id: impl Into<String>,
        prompt: RenderedPrompt,
        system: Option<String>,
        temperature: f64,
        max_tokens: u32,
    ) -> Self {
        let model_id = model_id.into();
        let temperature = if temperature.is_finite() { temperature.max(0.0) } else { 0.0 };
        let request_digest = sha256_hex(&[
            model_id.as_bytes(),
            prompt.spec_digest.as_bytes(),
            format!("{temperature:?}").as_bytes(),
            max_tokens.to_string().as_bytes(),
            system.as_deref().unwrap_or("").as_bytes(),
        ]);
        ChatRequest { model_id, prompt, system, temperature, max_tokens, request_digest }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatResponse {
    /// Verbatim completion text.
    pub text: String,
    pub finish_reason: String,
    pub latency_ms: u64,
    #[serde(default)]
    pub token_usage: TokenUsage,
}

#[derive(Debug, thiserror::Error)]
pub enum LlmError {
    #[error("no cassette entry for request {digest}")]
    CassetteMiss { digest: String },
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("provider returned HTTP {status}: {body}")]
    ProviderRefusal { status: u16, body: String },
    #[error("malformed provider response: {0}")]
    MalformedResponse(String),
    #[error("no chat backend configured (set LLM_API_BASE or use replay mode)")]
    NoBackend,
    #[error("cassette io error: {0}")]
    Io(#[from] std::io::Error),
}

impl LlmError {
    pub fn code(&self) -> &'static str {
        match self {
            LlmError::CassetteMiss { .. } => "cassette_miss",
            LlmError::Transport { .. } => "transport",
            LlmError::ProviderRefusal { .. } => "provider_refusal",
            LlmError::MalformedResponse(_) => "malformed_response",
            LlmError::NoBackend => "no_backend",
            LlmError::Io(_) => "io",
        }
    }
}

/// Something that can answer a chat request over the network.
pub trait ChatBackend: Send + Sync {
    fn send(&self, req: &ChatRequest) -> Result<ChatResponse, LlmError>;
}

/// Answers `req` according to the cassette mode. Replay never touches
/// `backend`; record serves known digests from the cassette and stores new
/// exchanges; passthrough always calls out and stores nothing.
pub fn complete(
    req: &ChatRequest,
    cassette: &Cassette,
    backend: Option<&dyn ChatBackend>,
) -> Result<ChatResponse, LlmError> {
    match cassette.mode() {
        CassetteMode::Replay => {
            cassette.get(&req.request_digest).ok_or_else(|| LlmError::CassetteMiss { digest: req.request_digest.clone() })
        }
        CassetteMode::Record => {
            if let Some(r) = cassette.get(&req.request_digest) {
                return Ok(r);
            }
            let r = backend.ok_or(LlmError::NoBackend)?.send(req)?;
            cassette.store(req, &r)?;
            Ok(r)
        }
        CassetteMode::Passthrough => backend.ok_or(LlmError::NoBackend)?.send(req),
    }
}

/// Completes every request with at most `parallelism` in flight. Results
/// come back in request order; one failure does not stop the rest.
pub fn batch_complete(
    reqs: &[ChatRequest],
    cassette: &Cassette,
    backend: Option<&dyn ChatBackend>,
    parallelism: usize,
) -> Vec<Result<ChatResponse, LlmError>> {
    crate::util::parallel_map(reqs, parallelism, |r| complete(r, cassette, backend))
}

pub(crate) fn millis(d: Duration) -> u64 {
    d.as_millis().min(u64::MAX as u128) as u64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::Strategy;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn prompt(n: usize) -> RenderedPrompt {
        RenderedPrompt { text: format!("prompt {n}"), strategy: Strategy::ZeroShot, spec_digest: format!("{n:064}") }
    }

    struct Echo {
        calls: AtomicUsize,
    }

    impl ChatBackend for Echo {
        fn send(&self, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            Ok(ChatResponse {
                text: format!("<sparql>ASK {{}}</sparql> for {}", req.prompt.text),
                finish_reason: "stop".into(),
                latency_ms: 1,
                token_usage: TokenUsage::default(),
            })
        }
    }

    #[test]
    fn digest_depends_on_params() {
        let a = ChatRequest::new("m", prompt(1));
        assert_eq!(a.request_digest, ChatRequest::new("m", prompt(1)).request_digest);
        assert_ne!(a.request_digest, ChatRequest::new("m2", prompt(1)).request_digest);
        assert_ne!(a.request_digest, ChatRequest::with_params("m", prompt(1), None, 0.7, 2048).request_digest);
        assert_eq!(a.temperature, 0.0);
    }

    #[test]
    fn record_then_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let echo = Echo { calls: AtomicUsize::new(0) };
        let rec = Cassette::open(&path, CassetteMode::Record).unwrap();
        let req = ChatRequest::new("m", prompt(1));
        let first = complete(&req, &rec, Some(&echo)).unwrap();
        let second = complete(&req, &rec, Some(&echo)).unwrap();
        assert_eq!(first, second);
        assert_eq!(echo.calls.load(Ordering::SeqCst), 1);

        let rep = Cassette::open(&path, CassetteMode::Replay).unwrap();
        assert_eq!(complete(&req, &rep, Some(&echo)).unwrap(), first);
        assert_eq!(echo.calls.load(Ordering::SeqCst), 1);
        let miss = complete(&ChatRequest::new("m", prompt(2)), &rep, None).unwrap_err();
        assert_eq!(miss.code(), "cassette_miss");
    }

    #[test]
    fn batch_keeps_order_and_collects_errors() {
        let cas = Cassette::in_memory(CassetteMode::Record);
        let echo = Echo { calls: AtomicUsize::new(0) };
        let reqs: Vec<_> = (0..5).map(|n| ChatRequest::new("m", prompt(n))).collect();
        batch_complete(&reqs[..2], &cas, Some(&echo), 2);
        let out = batch_complete(&reqs, &cas.with_mode(CassetteMode::Replay), None, 2);
        assert!(out[0].as_ref().unwrap().text.ends_with("prompt 0"));
        assert!(out[1].as_ref().unwrap().text.ends_with("prompt 1"));
        assert!(out[2..].iter().all(|r| matches!(r, Err(LlmError::CassetteMiss { .. }))));
    }
}
