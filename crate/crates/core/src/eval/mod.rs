//! Query execution and result-set comparison.
//!
//! Result sets use the W3C SPARQL JSON results format both on the wire and
//! when snapshotted into a benchmark manifest.

mod client;
mod compare;
mod normalize;

use std::collections::BTreeMap;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Map, Value};

pub use client::{ExecError, QueryExecutor, SparqlClient, DEFAULT_TIMEOUT};
pub use compare::{compare_results, CompareOptions, ComparisonMode, ComparisonOutcome};
pub use normalize::{normalize_term, normalize_term_checked};

use crate::sparql::QueryDoc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TermKind {
    Iri,
    Literal,
    Bnode,
}

/// One RDF term from a result row.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RdfTerm {
    pub kind: TermKind,
    pub value: String,
    pub datatype: Option<String>,
    pub lang: Option<String>,
}

impl RdfTerm {
    pub fn iri(v: impl Into<String>) -> Self {
        RdfTerm { kind: TermKind::Iri, value: v.into(), datatype: None, lang: None }
    }

    pub fn bnode(v: impl Into<String>) -> Self {
        RdfTerm { kind: TermKind::Bnode, value: v.into(), datatype: None, lang: None }
    }

    pub fn literal(v: impl Into<String>) -> Self {
        RdfTerm { kind: TermKind::Literal, value: v.into(), datatype: None, lang: None }
    }

    pub fn typed(v: impl Into<String>, datatype: impl Into<String>) -> Self {
        RdfTerm { kind: TermKind::Literal, value: v.into(), datatype: Some(datatype.into()), lang: None }
    }

    pub fn lang(v: impl Into<String>, lang: impl Into<String>) -> Self {
        RdfTerm { kind: TermKind::Literal, value: v.into(), datatype: None, lang: Some(lang.into()) }
    }

    fn to_json(&self) -> Value {
        let mut m = Map::new();
        let kind = match self.kind {
            TermKind::Iri => "uri",
            TermKind::Literal => "literal",
            TermKind::Bnode => "bnode",
        };
        m.insert("type".into(), Value::String(kind.into()));
        m.insert("value".into(), Value::String(self.value.clone()));
        if let Some(dt) = &self.datatype {
            m.insert("datatype".into(), Value::String(dt.clone()));
        }
        if let Some(l) = &self.lang {
            m.insert("xml:lang".into(), Value::String(l.clone()));
        }
        Value::Object(m)
    }

    fn from_json(v: &Value, at: &str) -> Result<Self, String> {
        let o = v.as_object().ok_or_else(|| format!("{at}: term is not an object"))?;
        let s = |k: &str| o.get(k).and_then(Value::as_str).map(str::to_string);
        let kind = match s("type").as_deref() {
            Some("uri") => TermKind::Iri,
            // Older endpoints emit "typed-literal" for literals with a datatype.
            Some("literal") | Some("typed-literal") => TermKind::Literal,
            Some("bnode") => TermKind::Bnode,
            other => return Err(format!("{at}: unknown term type {other:?}")),
        };
        let value = s("value").ok_or_else(|| format!("{at}: missing value"))?;
        let (datatype, lang) = if kind == TermKind::Literal {
            (s("datatype"), s("xml:lang"))
        } else {
            (None, None)
        };
        if datatype.is_some() && lang.is_some() {
            // rdf:langString is implied by a language tag.
            return Ok(RdfTerm { kind, value, datatype: None, lang });
        }
        Ok(RdfTerm { kind, value, datatype, lang })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResultKind {
    Bindings,
    Boolean,
}

pub type Row = BTreeMap<String, RdfTerm>;

/// Parsed query results. Serializes as SPARQL JSON results.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultSet {
    pub kind: ResultKind,
    pub variables: Vec<String>,
    pub rows: Vec<Row>,
    pub boolean: Option<bool>,
}

impl ResultSet {
    pub fn boolean(value: bool) -> Self {
        ResultSet { kind: ResultKind::Boolean, variables: Vec::new(), rows: Vec::new(), boolean: Some(value) }
    }

    pub fn bindings(variables: Vec<String>, rows: Vec<Row>) -> Self {
        ResultSet { kind: ResultKind::Bindings, variables, rows, boolean: None }
    }

    /// Number of answers: rows for bindings, 1 for a boolean.
    pub fn len(&self) -> usize {
        match self.kind {
            ResultKind::Bindings => self.rows.len(),
            ResultKind::Boolean => 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.kind == ResultKind::Bindings && self.rows.is_empty()
    }

    pub fn arity(&self) -> usize {
        self.variables.len()
    }

    pub fn to_json(&self) -> Value {
        match self.kind {
            ResultKind::Boolean => json!({"head": {}, "boolean": self.boolean.unwrap_or(false)}),
            ResultKind::Bindings => {
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|r| {
                        let mut m = Map::new();
                        // Emit in header order for stable output.
                        for v in &self.variables {
                            if let Some(t) = r.get(v) {
                                m.insert(v.clone(), t.to_json());
                            }
                        }
                        Value::Object(m)
                    })
                    .collect();
                json!({"head": {"vars": self.variables}, "results": {"bindings": rows}})
            }
        }
    }

    pub fn from_json(v: &Value) -> Result<Self, String> {
        let o = v.as_object().ok_or("results document is not an object")?;
        if let Some(b) = o.get("boolean") {
            let b = b.as_bool().ok_or("boolean is not true/false")?;
            return Ok(ResultSet::boolean(b));
        }
        let vars: Vec<String> = match o.get("head").and_then(|h| h.get("vars")) {
            Some(Value::Array(a)) => a
                .iter()
                .map(|x| x.as_str().map(str::to_string).ok_or("non-string variable name"))
                .collect::<Result<_, _>>()?,
            Some(_) => return Err("head.vars is not an array".into()),
            None => Vec::new(),
        };
        let bindings = o
            .get("results")
            .and_then(|r| r.get("bindings"))
            .and_then(Value::as_array)
            .ok_or("missing results.bindings")?;
        let mut rows = Vec::with_capacity(bindings.len());
        let mut vars = vars;
        for (i, b) in bindings.iter().enumerate() {
            let bo = b.as_object().ok_or_else(|| format!("row {i} is not an object"))?;
            let mut row = Row::new();
            for (k, t) in bo {
                if !vars.contains(k) {
                    vars.push(k.clone());
                }
                row.insert(k.clone(), RdfTerm::from_json(t, &format!("row {i}.{k}"))?);
            }
            rows.push(row);
        }
        Ok(ResultSet::bindings(vars, rows))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let v: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
        Self::from_json(&v)
    }
}

impl Serialize for ResultSet {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for ResultSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        ResultSet::from_json(&v).map_err(serde::de::Error::custom)
    }
}

/// True iff the query has a top-level ORDER BY.
pub fn is_order_sensitive(doc: &QueryDoc) -> bool {
    doc.order_sensitive
}
