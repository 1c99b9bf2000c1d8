//! Benchmark construction: ingest QALD / DBLP-QuAD style files, keep items
//! that execute with comparable non-empty answers on every KG, sample a
//! fixed-size manifest with embedded gold snapshots, attach categories.

mod build;
mod categories;
mod ingest;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use build::{build_benchmark, BuildOptions, ItemVerdict};
pub use categories::{attach_categories, parse_category_file, CategoryDistribution, QuestionCategory};
pub use ingest::{ingest_source, ingest_str, merge_sources, IngestOptions, IngestReport, RawItem, SourceFormat, SplitCounts};

use crate::align::Er2Doc;
use crate::eval::ResultSet;
use crate::exemplar::Exemplar;
use crate::profile::TranslationDirection;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("item {index}: {message}")]
    Format { index: usize, message: String },
    #[error("only {available} items passed filtering, {needed} requested")]
    InsufficientItems { needed: usize, available: usize },
    #[error("line {line}: unknown category {value:?}")]
    UnknownCategory { line: usize, value: String },
    #[error("line {line}: id {id:?} is not in the manifest")]
    UnknownId { line: usize, id: String },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl BenchError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        BenchError::Io { path: path.display().to_string(), source }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkItem {
    pub id: String,
    pub nlq: String,
    /// KG name -> gold SPARQL.
    pub query_by_kg: BTreeMap<String, String>,
    /// KG name -> snapshot of that query's answer.
    #[serde(default)]
    pub gold_by_kg: BTreeMap<String, ResultSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<QuestionCategory>,
    /// Direction key (`"DBpedia->Wikidata"`) -> er2 document.
    #[serde(default)]
    pub er2_by_direction: BTreeMap<String, Er2Doc>,
}

impl BenchmarkItem {
    /// Few-shot exemplar view of this item, if it has both queries.
    pub fn to_exemplar(&self, direction: &TranslationDirection) -> Option<Exemplar> {
        let q1 = self.query_by_kg.get(&direction.source.name)?;
        let q2 = self.query_by_kg.get(&direction.target.name)?;
        let er2 = self.er2_by_direction.get(&direction.key()).cloned().unwrap_or_else(|| {
            Er2Doc::new(direction.source.er2_key.clone(), direction.target.er2_key.clone())
        });
        Some(Exemplar { id: self.id.clone(), nlq: self.nlq.clone(), query_kg1: q1.clone(), query_kg2: q2.clone(), er2 })
    }
}

/// Manifest file, JSON:
///
/// ```text
/// {
///   "schema_version": 1,
///   "name": "qald9plus-dbpedia-wikidata",
///   "source_split": "train",
///   "snapshot_note": "free text: where and when gold answers were taken",
///   "count": 100,
///   "items": [{
///     "id": "99",
///     "nlq": "...",
///     "query_by_kg": {"DBpedia": "...", "Wikidata": "..."},
///     "gold_by_kg": {"DBpedia": <SPARQL JSON results>, ...},
///     "category": "Single Fact",                       // optional
///     "er2_by_direction": {"DBpedia->Wikidata": <er2>}   // optional
///   }]
/// }
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub name: String,
    pub source_split: String,
    #[serde(default)]
    pub snapshot_note: String,
    pub count: usize,
    pub items: Vec<BenchmarkItem>,
}

impl DatasetManifest {
    pub fn new(name: impl Into<String>, source_split: impl Into<String>, snapshot_note: impl Into<String>) -> Self {
        DatasetManifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            name: name.into(),
            source_split: source_split.into(),
            snapshot_note: snapshot_note.into(),
            count: 0,
            items: Vec::new(),
        }
    }

    pub fn get(&self, id: &str) -> Option<&BenchmarkItem> {
        self.items.iter().find(|i| i.id == id)
    }

    /// Checks unique ids and `count == items.len()`.
    pub fn check(&self) -> Result<(), BenchError> {
        if self.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(BenchError::Manifest(format!("unsupported schema_version {}", self.schema_version)));
        }
        if self.count != self.items.len() {
            return Err(BenchError::Manifest(format!("count {} but {} items", self.count, self.items.len())));
        }
        let mut seen = std::collections::BTreeSet::new();
        for it in &self.items {
            if !seen.insert(it.id.as_str()) {
                return Err(BenchError::Manifest(format!("duplicate id {:?}", it.id)));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
        let m: DatasetManifest = serde_json::from_str(&text).map_err(|e| BenchError::Manifest(e.to_string()))?;
        m.check()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<(), BenchError> {
        crate::util::write_atomic(path, self.to_json().as_bytes()).map_err(|e| BenchError::io(path, e))
    }
}
