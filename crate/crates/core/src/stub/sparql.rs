use std::sync::Arc;
use std::time::Duration;

use oxigraph::io::RdfFormat;
use oxigraph::sparql::results::{QueryResultsFormat, QueryResultsSerializer};
use oxigraph::sparql::{EvaluationError, QueryResults};
use oxigraph::store::Store;

use super::{Server, Traffic};
use crate::profile::KgProfile;
use crate::sparql::PrefixTable;

#[derive(Debug, Clone, Default)]
pub struct StubOptions {
    /// Sleep before answering each query.
    pub delay: Duration,
}

/// SPARQL protocol endpoint over an in-memory graph. Accepts GET `?query=`,
/// form-encoded POST and `application/sparql-query` POST; answers in the
/// JSON results format. Like public endpoints, it predeclares the prefixes
/// of its KG so queries may use them without PREFIX lines.
pub struct SparqlStub {
    server: Server,
    store: Store,
}

impl SparqlStub {
    pub fn start(turtle: &str, prefixes: &PrefixTable, opts: StubOptions) -> std::io::Result<Self> {
        let store = Store::new().map_err(std::io::Error::other)?;
        store.load_from_reader(RdfFormat::Turtle, turtle.as_bytes()).map_err(std::io::Error::other)?;
        let preamble: String = prefixes.iter().map(|(p, ns)| format!("PREFIX {p}: <{}>\n", ns.as_str())).collect();
        let s = store.clone();
        let server = Server::start(Arc::new(move |method, path, query, ctype, body| {
            if path != "/sparql" {
                return (404, "not found".into(), "text/plain");
            }
            let text = match (method, ctype) {
                (tiny_http::Method::Get, _) => form_value(query),
                (tiny_http::Method::Post, Some(c)) if c.starts_with("application/sparql-query") => Some(body),
                (tiny_http::Method::Post, _) => form_value(&body),
                _ => None,
            };
            let Some(text) = text else {
                return (400, "missing query parameter".into(), "text/plain");
            };
            if !opts.delay.is_zero() {
                std::thread::sleep(opts.delay);
            }
            answer(&s, &format!("{preamble}{text}"))
        }))?;
        Ok(SparqlStub { server, store })
    }

    /// Stub for `profile`'s KG with its prefixes (and rdf, rdfs, owl, xsd)
    /// predeclared.
    pub fn for_profile(turtle: &str, profile: &KgProfile) -> std::io::Result<Self> {
        Self::start(turtle, &profile.prefixes.merged_over(&PrefixTable::builtin()), StubOptions::default())
    }

    /// Endpoint URL, `http://127.0.0.1:<port>/sparql`.
    pub fn url(&self) -> String {
        format!("{}/sparql", self.server.base)
    }

    pub fn traffic(&self) -> &Traffic {
        &self.server.traffic
    }

    pub fn triples(&self) -> usize {
        self.store.len().unwrap_or(0)
    }
}

fn form_value(encoded: &str) -> Option<String> {
    form_urlencoded::parse(encoded.as_bytes()).find(|(k, _)| k == "query").map(|(_, v)| v.into_owned())
}

fn answer(store: &Store, query: &str) -> (u16, String, &'static str) {
    let results = match store.query(query) {
        Ok(r) => r,
        Err(EvaluationError::Parsing(e)) => return (400, format!("query parse error: {e}"), "text/plain"),
        Err(e) => return (500, format!("evaluation error: {e}"), "text/plain"),
    };
    let ser = QueryResultsSerializer::from_format(QueryResultsFormat::Json);
    let out = match results {
        QueryResults::Boolean(b) => ser.serialize_boolean_to_writer(Vec::new(), b).map_err(|e| e.to_string()),
        QueryResults::Solutions(solutions) => (|| {
            let mut w = ser
                .serialize_solutions_to_writer(Vec::new(), solutions.variables().to_vec())
                .map_err(|e| e.to_string())?;
            for s in solutions {
                let s = s.map_err(|e| e.to_string())?;
                w.serialize(s.iter()).map_err(|e| e.to_string())?;
            }
            w.finish().map_err(|e| e.to_string())
        })(),
        QueryResults::Graph(_) => return (400, "CONSTRUCT/DESCRIBE not supported".into(), "text/plain"),
    };
    match out {
        Ok(bytes) => (200, String::from_utf8(bytes).expect("json is utf-8"), "application/sparql-results+json"),
        Err(e) => (500, e, "text/plain"),
    }
}
