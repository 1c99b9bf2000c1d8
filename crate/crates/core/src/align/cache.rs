//! Append-only mapping cache.
//!
//! One JSON record per line:
//!
//! ```text
//! {"op":"put","target_kg":"Wikidata","mapping":{...TermMapping...}}
//! {"op":"evict","target_kg":"Wikidata","source_id":"http://..."}
//! ```
//!
//! Later lines win. Manual entries (provenance `manual_file`) shadow
//! endpoint-derived ones for the same key and are only replaced by other
//! manual entries or removed by an explicit eviction.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{Provenance, TermMapping};

#[derive(Debug, thiserror::Error)]
pub enum CacheError {
    #[error("cache io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("corrupt cache record at {path}:{line}: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum Record {
    Put { target_kg: String, mapping: TermMapping },
    Evict { target_kg: String, source_id: String },
}

type Key = (String, String);

#[derive(Debug, Default)]
struct Entries {
    endpoint: BTreeMap<Key, TermMapping>,
    manual: BTreeMap<Key, TermMapping>,
}

#[derive(Debug)]
pub struct MappingCache {
    path: Option<PathBuf>,
    inner: Mutex<Entries>,
}

impl MappingCache {
    pub fn in_memory() -> Self {
        MappingCache { path: None, inner: Mutex::new(Entries::default()) }
    }

    /// Opens (or creates on first write) the cache file at `path`.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, CacheError> {
        let path = path.as_ref().to_path_buf();
        let mut entries = Entries::default();
        match File::open(&path) {
            Ok(f) => {
                for (i, line) in BufReader::new(f).lines().enumerate() {
                    let line = line.map_err(|source| CacheError::Io { path: path.clone(), source })?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    let rec: Record = serde_json::from_str(&line).map_err(|e| CacheError::Corrupt {
                        path: path.clone(),
                        line: i + 1,
                        message: e.to_string(),
                    })?;
                    apply(&mut entries, rec);
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {}
            Err(source) => return Err(CacheError::Io { path, source }),
        }
        Ok(MappingCache { path: Some(path), inner: Mutex::new(entries) })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Manual entry if any, else the endpoint-derived one.
    pub fn get(&self, source_id: &str, target_kg: &str) -> Option<TermMapping> {
        let key = (source_id.to_string(), target_kg.to_string());
        let g = self.inner.lock().expect("cache lock");
        g.manual.get(&key).or_else(|| g.endpoint.get(&key)).cloned()
    }

    pub fn put(&self, target_kg: &str, mapping: TermMapping) -> Result<(), CacheError> {
        let rec = Record::Put { target_kg: target_kg.to_string(), mapping };
        self.append(rec)
    }

    /// Removes both manual and endpoint entries for the key.
    pub fn evict(&self, source_id: &str, target_kg: &str) -> Result<(), CacheError> {
        self.append(Record::Evict { target_kg: target_kg.to_string(), source_id: source_id.to_string() })
    }

    pub fn len(&self) -> usize {
        let g = self.inner.lock().expect("cache lock");
        let mut keys: Vec<&Key> = g.endpoint.keys().chain(g.manual.keys()).collect();
        keys.sort();
        keys.dedup();
        keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every effective mapping for `target_kg`, sorted by source IRI.
    pub fn mappings_for(&self, target_kg: &str) -> Vec<TermMapping> {
        let g = self.inner.lock().expect("cache lock");
        let mut out: BTreeMap<&str, &TermMapping> = BTreeMap::new();
        for ((src, kg), m) in &g.endpoint {
            if kg == target_kg {
                out.insert(src, m);
            }
        }
        for ((src, kg), m) in &g.manual {
            if kg == target_kg {
                out.insert(src, m);
            }
        }
        out.into_values().cloned().collect()
    }

    fn append(&self, rec: Record) -> Result<(), CacheError> {
        // The lock is held across the file write so lines never interleave.
        let mut g = self.inner.lock().expect("cache lock");
        if let Some(path) = &self.path {
            let line = serde_json::to_string(&rec).expect("record serializes");
            let io = |source| CacheError::Io { path: path.clone(), source };
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(io)?;
            }
            let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
            writeln!(f, "{line}").map_err(io)?;
        }
        apply(&mut g, rec);
        Ok(())
    }
}

fn apply(e: &mut Entries, rec: Record) {
    match rec {
        Record::Put { target_kg, mapping } => {
            let key = (mapping.source_id.to_string(), target_kg);
            match mapping.provenance {
                Provenance::ManualFile => e.manual.insert(key, mapping),
                Provenance::EndpointLookup => e.endpoint.insert(key, mapping),
            };
        }
        Record::Evict { target_kg, source_id } => {
            let key = (source_id, target_kg);
            e.manual.remove(&key);
            e.endpoint.remove(&key);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::align::MappingKind;
    use crate::sparql::Iri;

    fn m(src: &str, tgt: &[&str], prov: Provenance) -> TermMapping {
        TermMapping::new(
            Iri::new(src).unwrap(),
            tgt.iter().map(|t| Iri::new(*t).unwrap()).collect(),
            MappingKind::SameAs,
            prov,
            "2025-01-01T00:00:00Z",
        )
    }

    #[test]
    fn persists_and_reloads_identically() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        let c = MappingCache::open(&path).unwrap();
        let a = m("http://ex/a", &["http://t/2", "http://t/1", "http://t/1"], Provenance::EndpointLookup);
        assert_eq!(a.target_ids.len(), 2);
        c.put("T", a.clone()).unwrap();
        c.put("T", m("http://ex/b", &[], Provenance::EndpointLookup)).unwrap();
        let reopened = MappingCache::open(&path).unwrap();
        assert_eq!(reopened.get("http://ex/a", "T"), Some(a));
        assert_eq!(reopened.get("http://ex/b", "T").unwrap().target_ids.len(), 0);
        assert_eq!(reopened.get("http://ex/a", "Other"), None);
    }

    #[test]
    fn manual_shadows_endpoint_until_evicted() {
        let c = MappingCache::in_memory();
        c.put("T", m("http://ex/a", &["http://t/manual"], Provenance::ManualFile)).unwrap();
        c.put("T", m("http://ex/a", &["http://t/lookup"], Provenance::EndpointLookup)).unwrap();
        assert_eq!(c.get("http://ex/a", "T").unwrap().target_ids[0].as_str(), "http://t/manual");
        c.evict("http://ex/a", "T").unwrap();
        assert_eq!(c.get("http://ex/a", "T"), None);
    }

    #[test]
    fn corrupt_line_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.jsonl");
        std::fs::write(&path, "\n{not json\n").unwrap();
        match MappingCache::open(&path) {
            Err(CacheError::Corrupt { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }
}
