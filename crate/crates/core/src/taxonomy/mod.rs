//! Error labels for incorrect translations: heuristic pre-screen, manual
//! annotation sidecar, merge, and co-occurrence counts.

mod cooccur;
mod screen;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use cooccur::{cooccurrence_matrix, CooccurrenceMatrix};
pub use screen::{prescreen, ExecutionSummary, ScreenInput};

use crate::profile::KgProfile;
use crate::sparql::RDF_TYPE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorLabel {
    UnadaptedDatasetPatterns,
    QueryBadFormed,
    #[serde(rename = "PropertyAsEntity_OntologyAsResource")]
    PropertyAsEntity,
    #[serde(rename = "EntityAsProperty_ResourceAsOntology")]
    EntityAsProperty,
    MissingTypeAssertion,
    WrongOrMissingProperty,
    WrongOrMissingEntity,
    StructuralError,
}

impl ErrorLabel {
    pub const ALL: [ErrorLabel; 8] = [
        ErrorLabel::UnadaptedDatasetPatterns,
        ErrorLabel::QueryBadFormed,
        ErrorLabel::PropertyAsEntity,
        ErrorLabel::EntityAsProperty,
        ErrorLabel::MissingTypeAssertion,
        ErrorLabel::WrongOrMissingProperty,
        ErrorLabel::WrongOrMissingEntity,
        ErrorLabel::StructuralError,
    ];

    /// Row order of the error distribution table.
    pub const TABLE_ORDER: [ErrorLabel; 8] = [
        ErrorLabel::StructuralError,
        ErrorLabel::WrongOrMissingEntity,
        ErrorLabel::WrongOrMissingProperty,
        ErrorLabel::QueryBadFormed,
        ErrorLabel::MissingTypeAssertion,
        ErrorLabel::UnadaptedDatasetPatterns,
        ErrorLabel::PropertyAsEntity,
        ErrorLabel::EntityAsProperty,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Identifier used in files.
    pub fn code(self) -> &'static str {
        match self {
            ErrorLabel::UnadaptedDatasetPatterns => "UnadaptedDatasetPatterns",
            ErrorLabel::QueryBadFormed => "QueryBadFormed",
            ErrorLabel::PropertyAsEntity => "PropertyAsEntity_OntologyAsResource",
            ErrorLabel::EntityAsProperty => "EntityAsProperty_ResourceAsOntology",
            ErrorLabel::MissingTypeAssertion => "MissingTypeAssertion",
            ErrorLabel::WrongOrMissingProperty => "WrongOrMissingProperty",
            ErrorLabel::WrongOrMissingEntity => "WrongOrMissingEntity",
            ErrorLabel::StructuralError => "StructuralError",
        }
    }

    /// Row label naming both KG vocabularies.
    pub fn table_label(self) -> &'static str {
        match self {
            ErrorLabel::UnadaptedDatasetPatterns => "Unadapted Dataset Patterns",
            ErrorLabel::QueryBadFormed => "Query Bad Formed Error",
            ErrorLabel::PropertyAsEntity => "Property Treated as Entity / Ontology Treated as Resource",
            ErrorLabel::EntityAsProperty => "Entity Treated as Property / Resource Treated as Ontology",
            ErrorLabel::MissingTypeAssertion => "Missing P31 / Missing rdf:type",
            ErrorLabel::WrongOrMissingProperty => "Wrong Property / Ontology",
            ErrorLabel::WrongOrMissingEntity => "Wrong Entity / Resource",
            ErrorLabel::StructuralError => "Structural Error",
        }
    }

    /// Name as seen from a target KG, e.g. "Missing P31" for Wikidata.
    pub fn name_for(self, target: &KgProfile) -> String {
        match self {
            ErrorLabel::MissingTypeAssertion => {
                if target.type_property == RDF_TYPE {
                    "Missing rdf:type".into()
                } else {
                    let local = target.type_property.rsplit(['/', '#']).next().unwrap_or(&target.type_property);
                    format!("Missing {local}")
                }
            }
            other => other.table_label().to_string(),
        }
    }
}

impl fmt::Display for ErrorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for ErrorLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ErrorLabel::ALL
            .into_iter()
            .find(|l| l.code() == s || format!("{l:?}") == s)
            .ok_or_else(|| format!("unknown error label {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationSource {
    Heuristic,
    Manual,
    Merged,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub run_id: String,
    pub labels: BTreeSet<ErrorLabel>,
    pub source: AnnotationSource,
    #[serde(default)]
    pub notes: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

impl Annotation {
    pub fn heuristic(run_id: impl Into<String>, labels: BTreeSet<ErrorLabel>) -> Self {
        Annotation {
            run_id: run_id.into(),
            labels,
            source: AnnotationSource::Heuristic,
            notes: String::new(),
            annotator: None,
            timestamp: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("annotation run ids differ: {heuristic} vs {manual}")]
pub struct IdMismatch {
    pub heuristic: String,
    pub manual: String,
}

/// Manual labels win; the heuristic set is kept in the notes.
pub fn merge_annotations(heuristic: &Annotation, manual: Option<&Annotation>) -> Result<Annotation, IdMismatch> {
    let Some(m) = manual else { return Ok(heuristic.clone()) };
    if m.run_id != heuristic.run_id {
        return Err(IdMismatch { heuristic: heuristic.run_id.clone(), manual: m.run_id.clone() });
    }
    let h: Vec<&str> = heuristic.labels.iter().map(|l| l.code()).collect();
    let mut notes = format!("heuristic: {}", h.join(", "));
    if !m.notes.is_empty() {
        notes.push_str("; ");
        notes.push_str(&m.notes);
    }
    Ok(Annotation {
        run_id: m.run_id.clone(),
        labels: m.labels.clone(),
        source: AnnotationSource::Merged,
        notes,
        annotator: m.annotator.clone(),
        timestamp: m.timestamp.clone(),
    })
}

#[derive(Debug, thiserror::Error)]
pub enum SidecarError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}: {message}")]
    Invalid { path: String, line: usize, message: String },
}

/// Reads a manual annotation sidecar (JSONL, one [`Annotation`] per line,
/// later lines win). A missing file is an empty sidecar.
pub fn load_sidecar(path: &Path) -> Result<BTreeMap<String, Annotation>, SidecarError> {
    let p = path.display().to_string();
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(BTreeMap::new()),
        Err(source) => return Err(SidecarError::Io { path: p, source }),
    };
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let invalid = |message: String| SidecarError::Invalid { path: p.clone(), line: i + 1, message };
        let mut a: Annotation = serde_json::from_str(line).map_err(|e| invalid(e.to_string()))?;
        if a.labels.is_empty() {
            return Err(invalid("annotation has no labels".into()));
        }
        a.source = AnnotationSource::Manual;
        out.insert(a.run_id.clone(), a);
    }
    Ok(out)
}

pub fn append_sidecar(path: &Path, annotation: &Annotation) -> std::io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    writeln!(f, "{}", serde_json::to_string(annotation).expect("annotation serializes"))
}
