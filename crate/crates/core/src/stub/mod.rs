//! In-process HTTP servers standing in for a SPARQL endpoint and a
//! chat-completions API. Used by examples, tests and offline runs.

mod chat;
mod sparql;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

pub use chat::{ChatReply, ChatStub, ChatStubRequest};
pub use sparql::{SparqlStub, StubOptions};

/// Request counters shared with handler threads.
#[derive(Debug, Default)]
pub struct Traffic {
    requests: AtomicUsize,
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
}

impl Traffic {
    pub fn requests(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    /// Highest number of requests handled at the same moment.
    pub fn max_in_flight(&self) -> usize {
        self.max_in_flight.load(Ordering::SeqCst)
    }

    fn enter(self: &Arc<Self>) -> InFlight {
        self.requests.fetch_add(1, Ordering::SeqCst);
        let now = self.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
        self.max_in_flight.fetch_max(now, Ordering::SeqCst);
        InFlight(self.clone())
    }
}

struct InFlight(Arc<Traffic>);

impl Drop for InFlight {
    fn drop(&mut self) {
        self.0.in_flight.fetch_sub(1, Ordering::SeqCst);
    }
}

/// A tiny_http server on an ephemeral localhost port, one thread per
/// request. Stops when dropped.
struct Server {
    http: Arc<tiny_http::Server>,
    accept: Option<JoinHandle<()>>,
    base: String,
    traffic: Arc<Traffic>,
}

type Handler = dyn Fn(&tiny_http::Method, &str, &str, Option<&str>, String) -> (u16, String, &'static str) + Send + Sync;

impl Server {
    fn start(handler: Arc<Handler>) -> std::io::Result<Self> {
        let http = Arc::new(tiny_http::Server::http("127.0.0.1:0").map_err(std::io::Error::other)?);
        let addr = http.server_addr().to_ip().ok_or_else(|| std::io::Error::other("no ip address"))?;
        let traffic = Arc::new(Traffic::default());
        let (h, t) = (http.clone(), traffic.clone());
        let accept = std::thread::spawn(move || {
            for mut req in h.incoming_requests() {
                let (handler, t) = (handler.clone(), t.clone());
                std::thread::spawn(move || {
                    let _guard = t.enter();
                    let mut body = String::new();
                    let _ = req.as_reader().read_to_string(&mut body);
                    let url = req.url().to_string();
                    let (path, query) = url.split_once('?').unwrap_or((&url, ""));
                    let ctype = req
                        .headers()
                        .iter()
                        .find(|h| h.field.equiv("Content-Type"))
                        .map(|h| h.value.as_str().to_string());
                    let (status, text, mime) = handler(req.method(), path, query, ctype.as_deref(), body);
                    let header = tiny_http::Header::from_bytes("Content-Type", mime).expect("static header");
                    let resp = tiny_http::Response::from_string(text).with_status_code(status).with_header(header);
                    let _ = req.respond(resp);
                });
            }
        });
        Ok(Server { http, accept: Some(accept), base: format!("http://{addr}"), traffic })
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.http.unblock();
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}
