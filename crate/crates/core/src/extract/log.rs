//! Failure logging and the extract → sanitize → validate chain.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{
    extract_candidate, sanitize, validate_candidate, ExtractionMethod, ExtractionResult, ExtractionStatus,
    ValidationFailure,
};
use crate::util::sha256_hex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureStage {
    Extraction,
    Validation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureLogEntry {
    pub run_id: String,
    pub raw_digest: String,
    pub stage: FailureStage,
    pub reason: String,
}

/// Collects failures for later review. With a path, each entry is also
/// appended to a JSONL file as it arrives.
#[derive(Debug, Default)]
pub struct FailureLog {
    path: Option<PathBuf>,
    entries: Mutex<Vec<FailureLogEntry>>,
}

impl FailureLog {
    pub fn in_memory() -> Self {
        FailureLog::default()
    }

    pub fn to_file(path: impl Into<PathBuf>) -> Self {
        FailureLog { path: Some(path.into()), entries: Mutex::new(Vec::new()) }
    }

    pub fn record(&self, entry: FailureLogEntry) -> std::io::Result<()> {
        let mut g = self.entries.lock().expect("failure log lock");
        if let Some(path) = &self.path {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            let mut f = OpenOptions::new().create(true).append(true).open(path)?;
            writeln!(f, "{}", serde_json::to_string(&entry).expect("entry serializes"))?;
        }
        g.push(entry);
        Ok(())
    }

    pub fn entries(&self) -> Vec<FailureLogEntry> {
        self.entries.lock().expect("failure log lock").clone()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("failure log lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Reviewer corrections: JSONL lines `{"run_id": "...", "query_text": "..."}`.
/// Later lines win.
pub fn load_overrides(path: &Path) -> std::io::Result<BTreeMap<String, String>> {
    #[derive(Deserialize)]
    struct Line {
        run_id: String,
        query_text: String,
    }
    let text = std::fs::read_to_string(path)?;
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let l: Line = serde_json::from_str(line).map_err(|e| {
            std::io::Error::new(std::io::ErrorKind::InvalidData, format!("{}:{}: {e}", path.display(), i + 1))
        })?;
        out.insert(l.run_id, l.query_text);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessedOutput {
    pub extraction: ExtractionResult,
    /// Sanitized candidate; absent when extraction failed.
    pub candidate: Option<String>,
    pub validation: Option<ValidationFailure>,
}

impl ProcessedOutput {
    /// A candidate exists and passed validation.
    pub fn is_executable(&self) -> bool {
        self.candidate.is_some() && self.validation.is_none()
    }
}

/// Runs the full chain on one raw output, logging exactly one entry per
/// failed stage. An `override_text` replaces extraction outright.
pub fn process_output(
    run_id: &str,
    raw: &str,
    override_text: Option<&str>,
    log: &FailureLog,
) -> std::io::Result<ProcessedOutput> {
    let extraction = match override_text {
        Some(t) => ExtractionResult {
            status: ExtractionStatus::Extracted,
            query_text: Some(t.to_string()),
            method: Some(ExtractionMethod::Override),
            failure_reason: None,
            note: None,
        },
        None => extract_candidate(raw),
    };
    let digest = || sha256_hex(&[raw.as_bytes()]);
    let Some(text) = extraction.query_text.as_deref() else {
        log.record(FailureLogEntry {
            run_id: run_id.to_string(),
            raw_digest: digest(),
            stage: FailureStage::Extraction,
            reason: extraction.failure_reason.clone().unwrap_or_else(|| "no_query_material".into()),
        })?;
        return Ok(ProcessedOutput { extraction, candidate: None, validation: None });
    };
    let candidate = sanitize(text);
    let validation = validate_candidate(&candidate).err();
    if let Some(v) = &validation {
        log.record(FailureLogEntry {
            run_id: run_id.to_string(),
            raw_digest: digest(),
            stage: FailureStage::Validation,
            reason: v.reason.clone(),
        })?;
    }
    Ok(ProcessedOutput { extraction, candidate: Some(candidate), validation })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_entry_per_failed_stage() {
        let log = FailureLog::in_memory();
        let ok = process_output("r1", "<sparql>SELECT ?x WHERE { ?x ?p ?o }</sparql>", None, &log).unwrap();
        assert!(ok.is_executable());
        process_output("r2", "no idea", None, &log).unwrap();
        process_output("r3", "<sparql>SELECT ?x</sparql>", None, &log).unwrap();
        let e = log.entries();
        assert_eq!(e.len(), 2);
        assert_eq!((e[0].stage, e[0].reason.as_str()), (FailureStage::Extraction, "no_query_material"));
        assert_eq!((e[1].stage, e[1].reason.as_str()), (FailureStage::Validation, "missing_where"));
        assert_eq!(e[0].raw_digest.len(), 64);
    }

    #[test]
    fn overrides_replace_extraction_and_persist() {
        let dir = tempfile::tempdir().unwrap();
        let ov = dir.path().join("overrides.jsonl");
        std::fs::write(&ov, "{\"run_id\":\"r2\",\"query_text\":\"ASK { ?s ?p ?o }\"}\n").unwrap();
        let map = load_overrides(&ov).unwrap();
        let log = FailureLog::to_file(dir.path().join("fail/log.jsonl"));
        let out = process_output("r2", "no idea", map.get("r2").map(String::as_str), &log).unwrap();
        assert_eq!(out.extraction.method, Some(ExtractionMethod::Override));
        assert!(out.is_executable());
        process_output("r3", "nothing", None, &log).unwrap();
        let text = std::fs::read_to_string(dir.path().join("fail/log.jsonl")).unwrap();
        assert_eq!(text.lines().count(), 1);
    }
}
