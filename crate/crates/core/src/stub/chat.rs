use std::sync::Arc;

use serde_json::{json, Value};

use super::{Server, Traffic};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatStubRequest {
    pub model: String,
    /// Content of the last user message.
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChatReply {
    Text(String),
    /// Answer with this HTTP status and body instead.
    Status(u16, String),
}

type Responder = dyn Fn(&ChatStubRequest) -> ChatReply + Send + Sync;

/// Minimal chat-completions API: POST `/v1/chat/completions`.
pub struct ChatStub {
    server: Server,
}

impl ChatStub {
    pub fn start(responder: impl Fn(&ChatStubRequest) -> ChatReply + Send + Sync + 'static) -> std::io::Result<Self> {
        let responder: Arc<Responder> = Arc::new(responder);
        let server = Server::start(Arc::new(move |method, path, _, _, body| {
            if *method != tiny_http::Method::Post || path != "/v1/chat/completions" {
                return (404, "not found".into(), "text/plain");
            }
            let Ok(v) = serde_json::from_str::<Value>(&body) else {
                return (400, "body is not JSON".into(), "text/plain");
            };
            let prompt = v["messages"]
                .as_array()
                .and_then(|m| m.iter().rev().find(|m| m["role"] == "user"))
                .and_then(|m| m["content"].as_str())
                .unwrap_or("")
                .to_string();
            let req = ChatStubRequest { model: v["model"].as_str().unwrap_or("").to_string(), prompt };
            match responder(&req) {
                ChatReply::Text(text) => {
                    let body = json!({
                        "id": "stub",
                        "object": "chat.completion",
                        "model": req.model,
                        "choices": [{"index": 0, "message": {"role": "assistant", "content": text}, "finish_reason": "stop"}],
                        "usage": {"prompt_tokens": req.prompt.split_whitespace().count(), "completion_tokens": text.split_whitespace().count()},
                    });
                    (200, body.to_string(), "application/json")
                }
                ChatReply::Status(code, body) => (code, body, "text/plain"),
            }
        }))?;
        Ok(ChatStub { server })
    }

    /// Answers with the first rule whose needle occurs in the prompt, else
    /// `fallback`.
    pub fn with_rules(rules: Vec<(String, String)>, fallback: impl Into<String>) -> std::io::Result<Self> {
        let fallback = fallback.into();
        Self::start(move |r| {
            let text = rules.iter().find(|(needle, _)| r.prompt.contains(needle.as_str())).map_or(&fallback, |(_, a)| a);
            ChatReply::Text(text.clone())
        })
    }

    /// Base URL to use as `LLM_API_BASE`, ending in `/v1`.
    pub fn base_url(&self) -> String {
        format!("{}/v1", self.server.base)
    }

    pub fn traffic(&self) -> &Traffic {
        &self.server.traffic
    }
}
