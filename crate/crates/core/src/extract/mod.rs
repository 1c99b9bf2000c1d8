//! Getting an executable query out of raw model output.
//!
//! [`extract_candidate`] tries, in order: the last complete `<sparql>` pair,
//! an unclosed `<sparql>` running to the end, the last fenced code block that
//! contains a query, and finally a keyword scan. The candidate is then
//! [`sanitize`]d and checked by [`validate_candidate`].

mod log;
mod scan;

use serde::{Deserialize, Serialize};

pub use self::log::{load_overrides, process_output, FailureLog, FailureLogEntry, FailureStage, ProcessedOutput};
pub use scan::sanitize;

use crate::sparql::{parse_query, SparqlError, SyntaxFinding};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionStatus {
    Extracted,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionMethod {
    SparqlTag,
    CodeFence,
    KeywordScan,
    /// Replaced by a reviewer through an override file.
    Override,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub status: ExtractionStatus,
    pub query_text: Option<String>,
    pub method: Option<ExtractionMethod>,
    pub failure_reason: Option<String>,
    /// e.g. `unclosed_tag` for a truncated `<sparql>` block.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ExtractionResult {
    fn extracted(text: String, method: ExtractionMethod, note: Option<&str>) -> Self {
        ExtractionResult {
            status: ExtractionStatus::Extracted,
            query_text: Some(text),
            method: Some(method),
            failure_reason: None,
            note: note.map(str::to_string),
        }
    }

    fn failed(reason: &str) -> Self {
        ExtractionResult {
            status: ExtractionStatus::Failed,
            query_text: None,
            method: None,
            failure_reason: Some(reason.to_string()),
            note: None,
        }
    }

    pub fn is_extracted(&self) -> bool {
        self.status == ExtractionStatus::Extracted
    }
}

/// Pulls the most plausible query out of `raw`. Never fails; a failure is
/// reported in the result with reason `no_query_material`.
pub fn extract_candidate(raw: &str) -> ExtractionResult {
    if let Some((text, closed)) = scan::tagged(raw) {
        let note = (!closed).then_some("unclosed_tag");
        return ExtractionResult::extracted(text, ExtractionMethod::SparqlTag, note);
    }
    if let Some(text) = scan::fenced(raw) {
        return ExtractionResult::extracted(text, ExtractionMethod::CodeFence, None);
    }
    if let Some(text) = scan::keyword_segment(raw) {
        return ExtractionResult::extracted(text, ExtractionMethod::KeywordScan, None);
    }
    ExtractionResult::failed("no_query_material")
}

/// Why a candidate was rejected.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationFailure {
    /// `missing_query_form`, `missing_where`, `empty_projection` or `syntax`.
    pub reason: String,
    pub findings: Vec<String>,
}

/// Checks a sanitized candidate: a form keyword, a WHERE group for
/// SELECT/ASK, a non-empty SELECT projection, and overall syntax.
pub fn validate_candidate(query_text: &str) -> Result<(), ValidationFailure> {
    let fail = |reason: &str, findings: Vec<SyntaxFinding>| ValidationFailure {
        reason: reason.to_string(),
        findings: findings.iter().map(ToString::to_string).collect(),
    };
    match parse_query(query_text) {
        Err(SparqlError::NoQueryForm | SparqlError::Empty) => {
            Err(fail("missing_query_form", vec![SyntaxFinding::NoQueryForm]))
        }
        Err(e) => Err(fail("syntax", vec![e.as_finding()])),
        Ok(doc) => {
            let issues = doc.issues().to_vec();
            if issues.is_empty() {
                Ok(())
            } else if issues.contains(&SyntaxFinding::MissingWhere) {
                Err(fail("missing_where", issues))
            } else if issues.contains(&SyntaxFinding::EmptyProjection) {
                Err(fail("empty_projection", issues))
            } else {
                Err(fail("syntax", issues))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tag_wins_over_fence() {
        let raw = "```sparql\nSELECT ?a WHERE { ?a ?b ?c }\n```\nFinal: <sparql>SELECT ?x WHERE { ?x ?p ?o }</sparql>";
        let r = extract_candidate(raw);
        assert_eq!(r.method, Some(ExtractionMethod::SparqlTag));
        assert_eq!(r.query_text.as_deref(), Some("SELECT ?x WHERE { ?x ?p ?o }"));
    }

    #[test]
    fn last_pair_wins() {
        let raw = "<sparql>SELECT ?draft WHERE { ?draft ?p ?o }</sparql> hmm, better: <SPARQL>SELECT ?final WHERE { ?final ?p ?o }</SPARQL>";
        let r = extract_candidate(raw);
        assert_eq!(r.query_text.as_deref(), Some("SELECT ?final WHERE { ?final ?p ?o }"));
    }

    #[test]
    fn echoed_instruction_tags_are_skipped() {
        let raw = "I will put it within the tags '<sparql>' and '</sparql>'.\n```\nASK { ?s ?p ?o }\n```";
        let r = extract_candidate(raw);
        assert_eq!(r.method, Some(ExtractionMethod::CodeFence));
        assert_eq!(r.query_text.as_deref(), Some("ASK { ?s ?p ?o }"));
    }

    #[test]
    fn unclosed_tag_runs_to_end() {
        let r = extract_candidate("<sparql>\nSELECT ?x WHERE { ?x ?p ?o ");
        assert_eq!(r.method, Some(ExtractionMethod::SparqlTag));
        assert_eq!(r.note.as_deref(), Some("unclosed_tag"));
    }

    #[test]
    fn keyword_scan_trims_prose() {
        let raw = "The query is SELECT ?m WHERE { ?m <http://ex/h> ?h } ORDER BY DESC(?h) LIMIT 1. This returns the tallest.";
        let r = extract_candidate(raw);
        assert_eq!(r.method, Some(ExtractionMethod::KeywordScan));
        assert_eq!(
            r.query_text.as_deref(),
            Some("SELECT ?m WHERE { ?m <http://ex/h> ?h } ORDER BY DESC(?h) LIMIT 1")
        );
        let raw = "PREFIX wd: <http://www.wikidata.org/entity/>\nSELECT ?x WHERE { ?x ?p wd:Q5 }\nDone.";
        assert!(extract_candidate(raw).query_text.unwrap().starts_with("PREFIX wd:"));
    }

    #[test]
    fn refusal_fails() {
        let r = extract_candidate("I cannot translate this.");
        assert_eq!(r.status, ExtractionStatus::Failed);
        assert_eq!(r.failure_reason.as_deref(), Some("no_query_material"));
        // "select" in prose without query shape is not an anchor.
        assert!(!extract_candidate("Please select one of the options.").is_extracted());
    }

    #[test]
    fn validation_reasons() {
        assert_eq!(validate_candidate("WHERE { ?x ?p ?o }").unwrap_err().reason, "missing_query_form");
        assert_eq!(validate_candidate("SELECT ?x").unwrap_err().reason, "missing_where");
        assert_eq!(validate_candidate("SELECT WHERE { ?x ?p ?o }").unwrap_err().reason, "empty_projection");
        assert_eq!(validate_candidate("SELECT ?x WHERE { ?x ?p ?o ").unwrap_err().reason, "syntax");
        assert!(validate_candidate("SELECT DISTINCT ?uri WHERE { ?uri <http://www.wikidata.org/prop/direct/P57> <http://www.wikidata.org/entity/Q2001> }").is_ok());
    }

    proptest! {
        #[test]
        fn chain_is_total(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
            let raw = String::from_utf8_lossy(&bytes);
            let r = extract_candidate(&raw);
            if let Some(q) = r.query_text {
                let s = sanitize(&q);
                let _ = validate_candidate(&s);
            }
        }

        #[test]
        fn chain_is_total_on_sparqlish_text(raw in "(SELECT|ASK|PREFIX|<sparql>|</sparql>|```|\\{|\\}|\\?x|\"|<|>|#| |\n|[a-z:]{1,4}){0,30}") {
            let r = extract_candidate(&raw);
            if let Some(q) = r.query_text {
                let s = sanitize(&q);
                prop_assert_eq!(sanitize(&s), s.clone());
                let _ = validate_candidate(&s);
            }
        }
    }
}
