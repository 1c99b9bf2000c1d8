//! Term-level SPARQL model.
//!
//! This is deliberately not a SPARQL 1.1 grammar. The lexer plus a shallow
//! recursive walk over group patterns is enough to detect the query form,
//! collect prefixes, track which IRI sits in which triple slot, and notice the
//! surface features (ORDER BY, FILTER, aggregates, ...) that the evaluation
//! and error screening care about.

mod lexer;
mod parser;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::profile::KgProfile;

pub(crate) use lexer::iri_ref_len;
use lexer::{tokenize, unescape_local, TokenKind};

pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
pub const RDF_NS: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
pub const RDFS_NS: &str = "http://www.w3.org/2000/01/rdf-schema#";
pub const OWL_NS: &str = "http://www.w3.org/2002/07/owl#";
pub const XSD_NS: &str = "http://www.w3.org/2001/XMLSchema#";

/// An absolute IRI.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Iri(String);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("not an absolute IRI: {0:?}")]
pub struct InvalidIri(pub String);

impl Iri {
    pub fn new(value: impl Into<String>) -> Result<Self, InvalidIri> {
        let value = value.into();
        if is_absolute_iri(&value) {
            Ok(Iri(value))
        } else {
            Err(InvalidIri(value))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn starts_with(&self, namespace: &str) -> bool {
        self.0.starts_with(namespace)
    }
}

fn is_absolute_iri(s: &str) -> bool {
    let Some(colon) = s.find(':') else { return false };
    let scheme = &s[..colon];
    let mut chars = scheme.chars();
    let scheme_ok = chars.next().is_some_and(|c| c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '+' | '-' | '.'));
    scheme_ok && colon + 1 < s.len() && !s.chars().any(char::is_whitespace)
}

impl TryFrom<String> for Iri {
    type Error = InvalidIri;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        Iri::new(value)
    }
}

impl From<Iri> for String {
    fn from(iri: Iri) -> String {
        iri.0
    }
}

impl fmt::Display for Iri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Prefix label to namespace IRI.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PrefixTable(BTreeMap<String, Iri>);

impl PrefixTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// `rdf`, `rdfs`, `owl` and `xsd`, known to every query.
    pub fn builtin() -> Self {
        let mut t = Self::new();
        for (label, ns) in [("rdf", RDF_NS), ("rdfs", RDFS_NS), ("owl", OWL_NS), ("xsd", XSD_NS)] {
            t.insert(label, Iri(ns.to_string()));
        }
        t
    }

    pub fn insert(&mut self, label: impl Into<String>, ns: Iri) -> Option<Iri> {
        self.0.insert(label.into(), ns)
    }

    pub fn get(&self, label: &str) -> Option<&Iri> {
        self.0.get(label)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Iri)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Entries of `self` win over `other` on label clashes.
    pub fn merged_over(&self, other: &PrefixTable) -> PrefixTable {
        let mut out = other.clone();
        for (k, v) in &self.0 {
            out.0.insert(k.clone(), v.clone());
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Slot {
    Subject,
    Predicate,
    Object,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Position {
    pub triple: usize,
    pub slot: Slot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Entity,
    Property,
    Class,
    Unknown,
}

/// One distinct IRI of a query with every place it occurs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermOccurrence {
    pub iri: Iri,
    pub role: Role,
    pub positions: Vec<Position>,
}

impl TermOccurrence {
    pub fn only_predicate(&self) -> bool {
        self.positions.iter().all(|p| p.slot == Slot::Predicate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum QueryForm {
    Select,
    Ask,
    Construct,
    Describe,
}

impl QueryForm {
    fn from_word(w: &str) -> Option<Self> {
        match w.to_ascii_uppercase().as_str() {
            "SELECT" => Some(QueryForm::Select),
            "ASK" => Some(QueryForm::Ask),
            "CONSTRUCT" => Some(QueryForm::Construct),
            "DESCRIBE" => Some(QueryForm::Describe),
            _ => None,
        }
    }
}

impl fmt::Display for QueryForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QueryForm::Select => "SELECT",
            QueryForm::Ask => "ASK",
            QueryForm::Construct => "CONSTRUCT",
            QueryForm::Describe => "DESCRIBE",
        })
    }
}

/// A node in a triple pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    Var(String),
    Iri(Iri),
    /// Prefixed name whose prefix is not known yet, or a relative IRI.
    Unresolved(String),
    Literal,
    Blank,
    /// The `a` keyword in predicate position.
    TypeKeyword,
    /// A property path; holds its IRI (or `a`) steps in textual order.
    Path(Vec<Node>),
}

impl Node {
    pub fn as_iri(&self) -> Option<&Iri> {
        match self {
            Node::Iri(i) => Some(i),
            _ => None,
        }
    }

    /// True when this predicate asserts class membership: `a`, `rdf:type`,
    /// the given type property, or a path starting with one of these.
    pub fn is_type_predicate(&self, type_property: &str) -> bool {
        match self {
            Node::TypeKeyword => true,
            Node::Iri(i) => i.as_str() == RDF_TYPE || i.as_str() == type_property,
            Node::Path(steps) => steps.first().is_some_and(|s| s.is_type_predicate(type_property)),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriplePattern {
    pub subject: Node,
    pub predicate: Node,
    pub object: Node,
}

/// Surface features used for shape comparison.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryFeatures {
    pub filter: bool,
    pub optional: bool,
    pub union: bool,
    pub negation: bool,
    pub aggregate: bool,
    pub group_by: bool,
    pub subquery: bool,
    pub values: bool,
    pub bind: bool,
    pub distinct: bool,
}

/// Problems found while reading a query that do not stop term extraction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "finding", rename_all = "snake_case")]
pub enum SyntaxFinding {
    NoQueryForm,
    UnbalancedGroup { offset: usize },
    UnterminatedLiteral { offset: usize },
    InvalidCharacter { ch: char, offset: usize },
    MalformedPrefix { offset: usize },
    UnexpectedToken { token: String, offset: usize },
    MissingWhere,
    EmptyProjection,
    TrailingContent { offset: usize },
}

impl fmt::Display for SyntaxFinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SyntaxFinding::NoQueryForm => f.write_str("no query form"),
            SyntaxFinding::UnbalancedGroup { offset } => {
                write!(f, "unbalanced group (byte {offset})")
            }
            SyntaxFinding::UnterminatedLiteral { offset } => {
                write!(f, "unterminated literal (byte {offset})")
            }
            SyntaxFinding::InvalidCharacter { ch, offset } => {
                write!(f, "invalid character {ch:?} (byte {offset})")
            }
            SyntaxFinding::MalformedPrefix { offset } => {
                write!(f, "malformed prefix declaration (byte {offset})")
            }
            SyntaxFinding::UnexpectedToken { token, offset } => {
                write!(f, "unexpected token {token:?} (byte {offset})")
            }
            SyntaxFinding::MissingWhere => f.write_str("missing where group"),
            SyntaxFinding::EmptyProjection => f.write_str("empty projection"),
            SyntaxFinding::TrailingContent { offset } => {
                write!(f, "trailing content (byte {offset})")
            }
        }
    }
}

impl SyntaxFinding {
    pub fn code(&self) -> &'static str {
        match self {
            SyntaxFinding::NoQueryForm => "no_query_form",
            SyntaxFinding::UnbalancedGroup { .. } => "unbalanced_group",
            SyntaxFinding::UnterminatedLiteral { .. } => "unterminated_literal",
            SyntaxFinding::InvalidCharacter { .. } => "invalid_character",
            SyntaxFinding::MalformedPrefix { .. } => "malformed_prefix",
            SyntaxFinding::UnexpectedToken { .. } => "unexpected_token",
            SyntaxFinding::MissingWhere => "missing_where",
            SyntaxFinding::EmptyProjection => "empty_projection",
            SyntaxFinding::TrailingContent { .. } => "trailing_content",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SparqlError {
    #[error("empty query text")]
    Empty,
    #[error("lex failure: {0}")]
    Lex(SyntaxFinding),
    #[error("lex failure: no query form keyword (SELECT, ASK, CONSTRUCT, DESCRIBE)")]
    NoQueryForm,
    #[error("lex failure: {0}")]
    Unbalanced(SyntaxFinding),
    #[error("unknown prefix `{0}`")]
    UnknownPrefix(String),
}

impl SparqlError {
    pub fn as_finding(&self) -> SyntaxFinding {
        match self {
            SparqlError::Empty | SparqlError::NoQueryForm => SyntaxFinding::NoQueryForm,
            SparqlError::Lex(f) | SparqlError::Unbalanced(f) => f.clone(),
            SparqlError::UnknownPrefix(p) => SyntaxFinding::UnexpectedToken {
                token: format!("{p}:"),
                offset: 0,
            },
        }
    }
}

/// A lexed SPARQL query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryDoc {
    pub raw_text: String,
    pub form: QueryForm,
    pub prefixes: PrefixTable,
    pub terms: Vec<TermOccurrence>,
    pub projected_vars: Vec<String>,
    /// `SELECT *`.
    pub wildcard: bool,
    pub order_sensitive: bool,
    pub has_limit: bool,
    pub patterns: Vec<TriplePattern>,
    pub features: QueryFeatures,
    pub(crate) issues: Vec<SyntaxFinding>,
}

impl QueryDoc {
    /// Findings that did not prevent parsing (trailing prose, missing group...).
    pub fn issues(&self) -> &[SyntaxFinding] {
        &self.issues
    }

    /// Every IRI that occurs in the query, first-occurrence order.
    pub fn iris(&self) -> impl Iterator<Item = &Iri> {
        self.terms.iter().map(|t| &t.iri)
    }

    /// Prefixed names that could not be resolved during parsing.
    pub fn unresolved_names(&self) -> Vec<String> {
        fn walk(n: &Node, out: &mut Vec<String>) {
            match n {
                Node::Unresolved(s) => out.push(s.clone()),
                Node::Path(steps) => steps.iter().for_each(|s| walk(s, out)),
                _ => {}
            }
        }
        let mut out = Vec::new();
        for t in &self.patterns {
            walk(&t.subject, &mut out);
            walk(&t.predicate, &mut out);
            walk(&t.object, &mut out);
        }
        out
    }
}

/// Lexes and lightly parses `text`. Prefixed names resolve against the
/// declared prologue plus `rdf`/`rdfs`/`owl`/`xsd`.
pub fn parse_query(text: &str) -> Result<QueryDoc, SparqlError> {
    parser::parse(text, &PrefixTable::builtin())
}

/// Like [`parse_query`], additionally resolving against `defaults` (typically
/// a profile's namespace prefixes).
pub fn parse_query_with(text: &str, defaults: &PrefixTable) -> Result<QueryDoc, SparqlError> {
    parser::parse(text, &defaults.merged_over(&PrefixTable::builtin()))
}

/// Rewrites every prefixed name as `<absolute IRI>` and drops the `PREFIX`
/// declarations from the text. Only built-in prefixes are implicitly known.
pub fn expand_prefixes(doc: &QueryDoc) -> Result<QueryDoc, SparqlError> {
    expand_prefixes_with(doc, &PrefixTable::new())
}

/// [`expand_prefixes`] with extra implicitly-known prefixes.
pub fn expand_prefixes_with(doc: &QueryDoc, defaults: &PrefixTable) -> Result<QueryDoc, SparqlError> {
    let text = &doc.raw_text;
    let toks = tokenize(text).map_err(parser::lex_error)?;
    let known = doc.prefixes.merged_over(&defaults.merged_over(&PrefixTable::builtin()));

    let mut out = String::with_capacity(text.len() + 64);
    let mut last = 0;
    let mut i = 0;
    // Prologue declarations are removed together with the whitespace after them.
    while i < toks.len() {
        let t = &toks[i];
        if t.is_word("PREFIX") && i + 2 < toks.len() {
            if let (TokenKind::PrefixedName { local, .. }, TokenKind::IriRef(_)) =
                (&toks[i + 1].kind, &toks[i + 2].kind)
            {
                if local.is_empty() {
                    out.push_str(&text[last..t.start]);
                    let mut end = toks[i + 2].end;
                    end += text[end..].len() - text[end..].trim_start().len();
                    last = end;
                    i += 3;
                    continue;
                }
            }
        }
        if t.is_word("BASE") && i + 1 < toks.len() {
            i += 2;
            continue;
        }
        break;
    }
    for t in &toks[i..] {
        if let TokenKind::PrefixedName { prefix, local } = &t.kind {
            let ns = known
                .get(prefix)
                .ok_or_else(|| SparqlError::UnknownPrefix(prefix.clone()))?;
            out.push_str(&text[last..t.start]);
            out.push('<');
            out.push_str(ns.as_str());
            out.push_str(&unescape_local(local));
            out.push('>');
            last = t.end;
        }
    }
    out.push_str(&text[last..]);

    let mut expanded = parser::parse(&out, &PrefixTable::builtin())?;
    expanded.prefixes = doc.prefixes.clone();
    Ok(expanded)
}

/// Classifies every distinct IRI of `doc` with `profile`'s namespaces.
///
/// Namespace decides first; when an IRI falls in namespaces of several roles
/// (DBpedia `dbo:` is both property and class namespace, Wikidata `wd:` both
/// entity and class) its slots break the tie. IRIs outside the profile stay
/// `Unknown`.
pub fn extract_terms(doc: &QueryDoc, profile: &KgProfile) -> Vec<TermOccurrence> {
    doc.terms
        .iter()
        .map(|t| TermOccurrence {
            iri: t.iri.clone(),
            role: classify(doc, t, profile),
            positions: t.positions.clone(),
        })
        .collect()
}

/// True when `term` occurs as the object of a class-membership triple.
pub fn is_type_object(doc: &QueryDoc, iri: &Iri, pos: &Position, type_property: &str) -> bool {
    pos.slot == Slot::Object
        && doc.patterns.get(pos.triple).is_some_and(|t| {
            t.object.as_iri() == Some(iri) && t.predicate.is_type_predicate(type_property)
        })
}

fn classify(doc: &QueryDoc, term: &TermOccurrence, profile: &KgProfile) -> Role {
    let candidates = profile.namespace_roles(term.iri.as_str());
    match candidates.as_slice() {
        [] => Role::Unknown,
        // An entity-namespace IRI used only as a predicate is misused, not an
        // entity; the error screen looks at namespaces directly for that.
        [Role::Entity] if term.only_predicate() => Role::Unknown,
        [only] => *only,
        many => {
            let has = |r: Role| many.contains(&r);
            let in_predicate = term.positions.iter().any(|p| p.slot == Slot::Predicate);
            let as_type_object = term
                .positions
                .iter()
                .any(|p| is_type_object(doc, &term.iri, p, profile.type_property.as_str()));
            if in_predicate && has(Role::Property) {
                Role::Property
            } else if as_type_object && has(Role::Class) {
                Role::Class
            } else if has(Role::Entity) && !term.only_predicate() {
                Role::Entity
            } else {
                Role::Unknown
            }
        }
    }
}

/// `Ok` when the text parses and has the shape its form requires.
pub fn validate_syntax(text: &str) -> Result<(), Vec<SyntaxFinding>> {
    match parse_query(text) {
        Err(e) => Err(vec![e.as_finding()]),
        Ok(doc) if doc.issues.is_empty() => Ok(()),
        Ok(doc) => Err(doc.issues),
    }
}

#[cfg(test)]
mod tests;
