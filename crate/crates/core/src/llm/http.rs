use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{millis, ChatBackend, ChatRequest, ChatResponse, LlmError, TokenUsage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_backoff_ms: u64,
    pub max_backoff_ms: u64,
    /// Minimum gap between outgoing requests, 0 for none.
    pub min_interval_ms: u64,
    pub timeout_secs: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { attempts: 3, base_backoff_ms: 500, max_backoff_ms: 8000, min_interval_ms: 0, timeout_secs: 300 }
    }
}

impl RetryPolicy {
    fn backoff(&self, attempt: u32) -> Duration {
        let ms = self.base_backoff_ms.saturating_mul(1u64 << attempt.min(16));
        Duration::from_millis(ms.min(self.max_backoff_ms))
    }
}

/// Chat-completions over HTTP: POST `{base}/chat/completions` with
/// `model`, `messages`, `temperature`, `max_tokens`.
pub struct HttpChatBackend {
    base_url: String,
    api_key: Option<String>,
    policy: RetryPolicy,
    agent: ureq::Agent,
    last_sent: Mutex<Option<Instant>>,
}

impl HttpChatBackend {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>, policy: RetryPolicy) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs(policy.timeout_secs))
            .user_agent(concat!("sparql-bridge/", env!("CARGO_PKG_VERSION")))
            .build();
        HttpChatBackend { base_url: base_url.into(), api_key, policy, agent, last_sent: Mutex::new(None) }
    }

    /// From `LLM_API_BASE` and `LLM_API_KEY`; `None` if the base is unset.
    pub fn from_env(policy: RetryPolicy) -> Option<Self> {
        let base = std::env::var("LLM_API_BASE").ok().filter(|s| !s.is_empty())?;
        Some(Self::new(base, std::env::var("LLM_API_KEY").ok(), policy))
    }

    fn pace(&self) {
        if self.policy.min_interval_ms == 0 {
            return;
        }
        let gap = Duration::from_millis(self.policy.min_interval_ms);
        let mut last = self.last_sent.lock().expect("pace lock");
        if let Some(t) = *last {
            let since = t.elapsed();
            if since < gap {
                std::thread::sleep(gap - since);
            }
        }
        *last = Some(Instant::now());
    }

    fn body(req: &ChatRequest) -> Value {
        let mut messages = Vec::new();
        if let Some(s) = &req.system {
            messages.push(json!({"role": "system", "content": s}));
        }
        messages.push(json!({"role": "user", "content": req.prompt.text}));
        json!({
            "model": req.model_id,
            "messages": messages,
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        })
    }
}

fn parse_response(v: &Value, latency_ms: u64) -> Result<ChatResponse, LlmError> {
    let choice = &v["choices"][0];
    let text = choice["message"]["content"]
        .as_str()
        .or_else(|| choice["text"].as_str())
        .ok_or_else(|| LlmError::MalformedResponse("no choices[0].message.content".into()))?;
    Ok(ChatResponse {
        text: text.to_string(),
        finish_reason: choice["finish_reason"].as_str().unwrap_or("unknown").to_string(),
        latency_ms,
        token_usage: TokenUsage {
            prompt_tokens: v["usage"]["prompt_tokens"].as_u64().unwrap_or(0),
            completion_tokens: v["usage"]["completion_tokens"].as_u64().unwrap_or(0),
        },
    })
}

impl ChatBackend for HttpChatBackend {
    fn send(&self, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
        let url = format!("{}/chat/completions", self.base_url.trim_end_matches('/'));
        let body = Self::body(req);
        let attempts = self.policy.attempts.max(1);
        let mut last_err = None;
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(self.policy.backoff(attempt - 1));
            }
            self.pace();
            let mut call = self.agent.post(&url).set("Content-Type", "application/json");
            if let Some(k) = &self.api_key {
                call = call.set("Authorization", &format!("Bearer {k}"));
            }
            let started = Instant::now();
            match call.send_json(body.clone()) {
                Ok(resp) => {
                    let v: Value = resp.into_json().map_err(|e| LlmError::MalformedResponse(e.to_string()))?;
                    return parse_response(&v, millis(started.elapsed()));
                }
                Err(ureq::Error::Status(status, resp)) => {
                    let text = resp.into_string().unwrap_or_default();
                    let err = LlmError::ProviderRefusal { status, body: text };
                    if status == 429 || status >= 500 {
                        log::warn!("chat endpoint returned {status}, attempt {}/{attempts}", attempt + 1);
                        last_err = Some(err);
                        continue;
                    }
                    return Err(err);
                }
                Err(ureq::Error::Transport(t)) => {
                    log::warn!("chat transport error on attempt {}/{attempts}: {t}", attempt + 1);
                    last_err = Some(LlmError::Transport { attempts: attempt + 1, message: t.to_string() });
                }
            }
        }
        Err(last_err.expect("at least one attempt"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_chat_completion_json() {
        let v: Value = serde_json::from_str(
            r#"{"choices":[{"message":{"role":"assistant","content":"<sparql>ASK {}</sparql>"},"finish_reason":"stop"}],
                "usage":{"prompt_tokens":12,"completion_tokens":5}}"#,
        )
        .unwrap();
        let r = parse_response(&v, 7).unwrap();
        assert_eq!(r.text, "<sparql>ASK {}</sparql>");
        assert_eq!(r.token_usage.completion_tokens, 5);
        assert!(parse_response(&json!({"choices": []}), 0).is_err());
    }

    #[test]
    fn backoff_is_capped() {
        let p = RetryPolicy::default();
        assert_eq!(p.backoff(0), Duration::from_millis(500));
        assert_eq!(p.backoff(1), Duration::from_millis(1000));
        assert_eq!(p.backoff(10), Duration::from_millis(8000));
    }
}
