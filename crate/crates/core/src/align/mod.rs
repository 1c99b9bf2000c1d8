//! Source-to-target term alignment and er2 documents.

mod cache;
mod er2;
mod lookup;
mod manual;

use serde::{Deserialize, Serialize};

pub use cache::{CacheError, MappingCache};
pub use er2::{Er2Doc, Er2Entry, Er2Style};
pub use lookup::{
    build_er2, coverage_stats, lookup_equivalents, source_terms, AlignError, Aligner, CoverageStats,
    LookupOptions,
};
pub use manual::{load_manual_mappings, orcid_mappings, parse_manual_mappings, ManualLoadError, SchemaError};

use crate::sparql::Iri;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MappingKind {
    #[serde(rename = "sameAs")]
    SameAs,
    #[serde(rename = "equivalentProperty")]
    EquivalentProperty,
    #[serde(rename = "equivalentClass")]
    EquivalentClass,
    #[serde(rename = "orcid")]
    Orcid,
    #[serde(rename = "manual")]
    Manual,
}

impl MappingKind {
    /// The OWL predicate behind an endpoint-derived kind.
    pub fn predicate(self) -> Option<&'static str> {
        match self {
            MappingKind::SameAs => Some("http://www.w3.org/2002/07/owl#sameAs"),
            MappingKind::EquivalentProperty => Some("http://www.w3.org/2002/07/owl#equivalentProperty"),
            MappingKind::EquivalentClass => Some("http://www.w3.org/2002/07/owl#equivalentClass"),
            MappingKind::Orcid | MappingKind::Manual => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    EndpointLookup,
    ManualFile,
}

/// One source IRI and its equivalents in the target KG.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermMapping {
    pub source_id: Iri,
    /// Sorted, deduplicated, all inside the target KG's namespaces.
    pub target_ids: Vec<Iri>,
    pub kind: MappingKind,
    pub provenance: Provenance,
    /// RFC 3339; informational only.
    pub retrieved_at: String,
}

impl TermMapping {
    pub fn new(
        source_id: Iri,
        mut target_ids: Vec<Iri>,
        kind: MappingKind,
        provenance: Provenance,
        retrieved_at: impl Into<String>,
    ) -> Self {
        target_ids.sort();
        target_ids.dedup();
        TermMapping { source_id, target_ids, kind, provenance, retrieved_at: retrieved_at.into() }
    }

    pub fn is_mapped(&self) -> bool {
        !self.target_ids.is_empty()
    }
}

pub(crate) fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Stores manual mappings in `cache`, where they shadow endpoint lookups.
pub fn insert_manual(
    cache: &MappingCache,
    target_kg: &str,
    mappings: impl IntoIterator<Item = TermMapping>,
) -> Result<usize, CacheError> {
    let mut n = 0;
    for mut m in mappings {
        m.provenance = Provenance::ManualFile;
        cache.put(target_kg, m)?;
        n += 1;
    }
    Ok(n)
}
