//! Equivalence-link lookups against SPARQL endpoints.

use std::collections::BTreeSet;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{now_rfc3339, CacheError, Er2Doc, Er2Entry, MappingCache, MappingKind, Provenance, TermMapping};
use crate::eval::{ExecError, QueryExecutor, TermKind};
use crate::profile::{KgProfile, TranslationDirection};
use crate::sparql::{
    expand_prefixes_with, extract_terms, parse_query_with, Iri, Role, SparqlError, TermOccurrence,
};

#[derive(Debug, thiserror::Error)]
pub enum AlignError {
    #[error("lookup for {iri} failed: {error}")]
    Endpoint { iri: String, error: ExecError },
    #[error("no cached mapping for {iri} and lookups are disabled")]
    Offline { iri: String },
    #[error(transparent)]
    Cache(#[from] CacheError),
    #[error("cannot read source query: {0}")]
    Sparql(#[from] SparqlError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LookupOptions {
    /// Total attempts per lookup, including the first.
    pub attempts: u32,
    /// Delay before the first retry; doubles each time.
    #[serde(with = "millis")]
    pub backoff: Duration,
    /// Ask the target endpoint for inverse links (`?t owl:sameAs <src>`)
    /// instead of the source endpoint for outgoing ones.
    pub query_target: bool,
    /// In-flight lookups per endpoint.
    pub parallelism: usize,
}

impl Default for LookupOptions {
    fn default() -> Self {
        LookupOptions { attempts: 3, backoff: Duration::from_millis(200), query_target: false, parallelism: 4 }
    }
}

mod millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

fn kinds_for(role: Role) -> &'static [MappingKind] {
    match role {
        Role::Entity => &[MappingKind::SameAs],
        Role::Property => &[MappingKind::EquivalentProperty],
        Role::Class => &[MappingKind::EquivalentClass],
        Role::Unknown => &[MappingKind::SameAs, MappingKind::EquivalentProperty, MappingKind::EquivalentClass],
    }
}

fn lookup_query(iri: &str, kinds: &[MappingKind], inverse: bool) -> String {
    let preds: Vec<String> = kinds.iter().filter_map(|k| k.predicate()).map(|p| format!("<{p}>")).collect();
    let triple = if inverse { format!("?t ?k <{iri}>") } else { format!("<{iri}> ?k ?t") };
    format!("SELECT DISTINCT ?k ?t WHERE {{ VALUES ?k {{ {} }} {triple} }}", preds.join(" "))
}

/// Runs one query with retries on transient errors.
fn execute_with_retry(
    exec: &dyn QueryExecutor,
    query: &str,
    endpoint: &str,
    opts: &LookupOptions,
) -> Result<crate::eval::ResultSet, ExecError> {
    let mut delay = opts.backoff;
    let mut attempt = 1;
    loop {
        match exec.execute(query, endpoint) {
            Ok(rs) => return Ok(rs),
            Err(e) if e.is_transient() && attempt < opts.attempts.max(1) => {
                log::warn!("lookup attempt {attempt} against {endpoint} failed: {e}; retrying");
                std::thread::sleep(delay);
                delay *= 2;
                attempt += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

/// Queries the equivalence links of `term` without touching any cache.
/// Results outside the target profile's namespaces are dropped.
pub fn lookup_equivalents(
    term: &TermOccurrence,
    direction: &TranslationDirection,
    exec: &dyn QueryExecutor,
    opts: &LookupOptions,
    retrieved_at: String,
) -> Result<TermMapping, AlignError> {
    let kinds = kinds_for(term.role);
    let endpoint = if opts.query_target { &direction.target.endpoint_url } else { &direction.source.endpoint_url };
    let query = lookup_query(term.iri.as_str(), kinds, opts.query_target);
    let rs = execute_with_retry(exec, &query, endpoint, opts)
        .map_err(|error| AlignError::Endpoint { iri: term.iri.to_string(), error })?;

    let mut by_kind: Vec<(MappingKind, Vec<Iri>)> = kinds.iter().map(|k| (*k, Vec::new())).collect();
    for row in &rs.rows {
        let (Some(k), Some(t)) = (row.get("k"), row.get("t")) else { continue };
        if t.kind != TermKind::Iri || !direction.target.owns(&t.value) {
            continue;
        }
        let Ok(t) = Iri::new(t.value.clone()) else { continue };
        if let Some((_, list)) = by_kind.iter_mut().find(|(kind, _)| kind.predicate() == Some(k.value.as_str())) {
            list.push(t);
        }
    }
    // Preference follows `kinds` order; an unmapped term keeps the first kind.
    let (kind, targets) = by_kind
        .iter()
        .find(|(_, l)| !l.is_empty())
        .cloned()
        .unwrap_or((kinds[0], Vec::new()));
    Ok(TermMapping::new(term.iri.clone(), targets, kind, Provenance::EndpointLookup, retrieved_at))
}

/// Cache-first lookup service.
pub struct Aligner<'a> {
    cache: &'a MappingCache,
    executor: Option<&'a dyn QueryExecutor>,
    options: LookupOptions,
    clock: fn() -> String,
}

impl<'a> Aligner<'a> {
    pub fn new(cache: &'a MappingCache, executor: &'a dyn QueryExecutor) -> Self {
        Aligner { cache, executor: Some(executor), options: LookupOptions::default(), clock: now_rfc3339 }
    }

    /// Serves only from the cache; a miss is an error.
    pub fn offline(cache: &'a MappingCache) -> Self {
        Aligner { cache, executor: None, options: LookupOptions::default(), clock: now_rfc3339 }
    }

    pub fn with_options(mut self, options: LookupOptions) -> Self {
        self.options = options;
        self
    }

    /// Overrides the timestamp source (tests pin it).
    pub fn with_clock(mut self, clock: fn() -> String) -> Self {
        self.clock = clock;
        self
    }

    pub fn cache(&self) -> &MappingCache {
        self.cache
    }

    /// Cached mapping if present, else an endpoint lookup that is cached
    /// (empty results included, errors never).
    pub fn fetch_equivalents(
        &self,
        term: &TermOccurrence,
        direction: &TranslationDirection,
    ) -> Result<TermMapping, AlignError> {
        if let Some(m) = self.cache.get(term.iri.as_str(), &direction.target.name) {
            return Ok(m);
        }
        let exec = self.executor.ok_or_else(|| AlignError::Offline { iri: term.iri.to_string() })?;
        let m = lookup_equivalents(term, direction, exec, &self.options, (self.clock)())?;
        self.cache.put(&direction.target.name, m.clone())?;
        Ok(m)
    }
}

/// Source-KG terms of a query: expanded with the profile's prefixes, roles
/// assigned, IRIs outside the profile's namespaces dropped.
pub fn source_terms(query: &str, profile: &KgProfile) -> Result<Vec<TermOccurrence>, SparqlError> {
    let doc = parse_query_with(query, &profile.prefixes)?;
    let doc = expand_prefixes_with(&doc, &profile.prefixes)?;
    Ok(extract_terms(&doc, profile).into_iter().filter(|t| profile.owns(t.iri.as_str())).collect())
}

/// One er2 entry per distinct source-KG term, first-occurrence order,
/// unmapped terms included with an empty list.
pub fn build_er2(
    terms: &[TermOccurrence],
    direction: &TranslationDirection,
    aligner: &Aligner<'_>,
) -> Result<Er2Doc, AlignError> {
    let mut seen = BTreeSet::new();
    let todo: Vec<&TermOccurrence> = terms
        .iter()
        .filter(|t| direction.source.owns(t.iri.as_str()))
        .filter(|t| seen.insert(t.iri.clone()))
        .collect();
    let results =
        crate::util::parallel_map(&todo, aligner.options.parallelism, |t| aligner.fetch_equivalents(t, direction));
    let mut doc = Er2Doc::new(direction.source.er2_key.clone(), direction.target.er2_key.clone());
    for r in results {
        doc.entries.push(Er2Entry::from(&r?));
    }
    Ok(doc)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageStats {
    pub total_terms: usize,
    pub mapped: usize,
    pub unmapped: usize,
    pub unmapped_list: Vec<Iri>,
}

/// Distinct source-KG terms across `queries` and how many have a non-empty
/// cached mapping. Terms absent from the cache count as unmapped; queries
/// that do not parse contribute nothing.
pub fn coverage_stats<'q>(
    queries: impl IntoIterator<Item = &'q str>,
    direction: &TranslationDirection,
    cache: &MappingCache,
) -> CoverageStats {
    let mut all = BTreeSet::new();
    for q in queries {
        if let Ok(terms) = source_terms(q, &direction.source) {
            all.extend(terms.into_iter().map(|t| t.iri));
        }
    }
    let mut unmapped_list = Vec::new();
    let mut mapped = 0;
    for iri in &all {
        match cache.get(iri.as_str(), &direction.target.name) {
            Some(m) if m.is_mapped() => mapped += 1,
            _ => unmapped_list.push(iri.clone()),
        }
    }
    CoverageStats { total_terms: all.len(), mapped, unmapped: unmapped_list.len(), unmapped_list }
}
