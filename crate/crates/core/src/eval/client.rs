//! SPARQL protocol client.

use std::time::Duration;

use super::ResultSet;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExecError {
    #[error("endpoint returned HTTP {status}: {body}")]
    Endpoint { status: u16, body: String },
    #[error("query timed out")]
    Timeout,
    #[error("malformed results: {0}")]
    MalformedResponse(String),
    #[error("transport error: {0}")]
    Transport(String),
}

impl ExecError {
    /// Short machine-readable tag for records and reports.
    pub fn code(&self) -> String {
        match self {
            ExecError::Endpoint { status, .. } => format!("endpoint_{status}"),
            ExecError::Timeout => "timeout".into(),
            ExecError::MalformedResponse(_) => "malformed_response".into(),
            ExecError::Transport(_) => "transport".into(),
        }
    }

    /// Worth retrying: network trouble, throttling, server errors.
    pub fn is_transient(&self) -> bool {
        match self {
            ExecError::Endpoint { status, .. } => *status == 429 || *status >= 500,
            ExecError::Timeout | ExecError::Transport(_) => true,
            ExecError::MalformedResponse(_) => false,
        }
    }
}

/// Anything that can run a SPARQL query against an endpoint URL.
pub trait QueryExecutor: Send + Sync {
    fn execute(&self, query: &str, endpoint: &str) -> Result<ResultSet, ExecError>;
}

/// Blocking HTTP client speaking the SPARQL protocol (POST form, JSON results).
#[derive(Debug, Clone)]
pub struct SparqlClient {
    agent: ureq::Agent,
    timeout: Duration,
}

impl Default for SparqlClient {
    fn default() -> Self {
        Self::new(DEFAULT_TIMEOUT)
    }
}

impl SparqlClient {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(timeout)
            .user_agent(concat!("sparql-bridge/", env!("CARGO_PKG_VERSION")))
            .build();
        SparqlClient { agent, timeout }
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    pub fn execute_query(&self, query: &str, endpoint: &str) -> Result<ResultSet, ExecError> {
        let resp = self
            .agent
            .post(endpoint)
            .set("Accept", "application/sparql-results+json")
            .send_form(&[("query", query)]);
        let resp = match resp {
            Ok(r) => r,
            Err(ureq::Error::Status(status, r)) => {
                let body = r.into_string().unwrap_or_default();
                return Err(ExecError::Endpoint { status, body: truncate(body, 2000) });
            }
            Err(ureq::Error::Transport(t)) => return Err(transport_error(&t)),
        };
        let body = resp.into_string().map_err(|e| {
            if e.kind() == std::io::ErrorKind::TimedOut || e.kind() == std::io::ErrorKind::WouldBlock {
                ExecError::Timeout
            } else {
                ExecError::Transport(e.to_string())
            }
        })?;
        ResultSet::parse(&body).map_err(ExecError::MalformedResponse)
    }
}

impl QueryExecutor for SparqlClient {
    fn execute(&self, query: &str, endpoint: &str) -> Result<ResultSet, ExecError> {
        self.execute_query(query, endpoint)
    }
}

fn transport_error(t: &ureq::Transport) -> ExecError {
    let msg = t.to_string();
    let timed_out = std::error::Error::source(t)
        .and_then(|s| s.downcast_ref::<std::io::Error>())
        .is_some_and(|e| matches!(e.kind(), std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock))
        || msg.contains("timed out");
    if timed_out {
        ExecError::Timeout
    } else {
        ExecError::Transport(msg)
    }
}

fn truncate(mut s: String, max: usize) -> String {
    if s.len() > max {
        let mut cut = max;
        while !s.is_char_boundary(cut) {
            cut -= 1;
        }
        s.truncate(cut);
    }
    s
}
