//! Manual and ORCID-derived mappings.
//!
//! A manual mapping file is an er2 array whose entries also carry `kind`:
//!
//! ```json
//! [{"dblp_id": "https://dblp.org/rdf/schema#authoredBy",
//!   "openalex_ids": ["https://semopenalex.org/ontology/hasAuthorship"],
//!   "kind": "manual"}]
//! ```

use std::path::Path;

use serde_json::Value;

use super::{MappingKind, Provenance, TermMapping};
use crate::profile::TranslationDirection;
use crate::sparql::Iri;
use crate::util::line_col;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("mapping file error at line {line}, column {column}: {message}")]
pub struct SchemaError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// Byte offsets where each top-level array element starts.
fn element_offsets(text: &str) -> Vec<usize> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut in_str = false;
    let mut escape = false;
    let mut expect_elem = false;
    for (i, c) in text.char_indices() {
        if in_str {
            if escape {
                escape = false;
            } else if c == '\\' {
                escape = true;
            } else if c == '"' {
                in_str = false;
            }
            continue;
        }
        if expect_elem && !c.is_whitespace() {
            out.push(i);
            expect_elem = false;
        }
        match c {
            '"' => in_str = true,
            '[' | '{' => {
                depth += 1;
                if depth == 1 && c == '[' {
                    expect_elem = true;
                }
            }
            ']' | '}' => depth -= 1,
            ',' if depth == 1 => expect_elem = true,
            _ => {}
        }
    }
    out
}

/// Parses manual mappings for `direction` from file contents.
/// Whitespace-only input yields no mappings.
pub fn parse_manual_mappings(
    text: &str,
    direction: &TranslationDirection,
    retrieved_at: &str,
) -> Result<Vec<TermMapping>, SchemaError> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let v: Value = serde_json::from_str(text).map_err(|e| SchemaError {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let arr = v.as_array().ok_or_else(|| SchemaError {
        line: 1,
        column: 1,
        message: "expected a JSON array".into(),
    })?;
    let offsets = element_offsets(text);
    let source_key = format!("{}_id", direction.source.er2_key);
    let target_keys = [format!("{}_ids", direction.target.er2_key), format!("{}_id", direction.target.er2_key)];
    let mut out = Vec::with_capacity(arr.len());
    for (i, item) in arr.iter().enumerate() {
        let at = |message: String| {
            let (line, column) = line_col(text, offsets.get(i).copied().unwrap_or(0));
            SchemaError { line, column, message }
        };
        let o = item.as_object().ok_or_else(|| at(format!("entry {i} is not an object")))?;
        let src = o
            .get(&source_key)
            .and_then(Value::as_str)
            .ok_or_else(|| at(format!("entry {i} lacks string {source_key:?}")))?;
        let source_id = Iri::new(src).map_err(|e| at(e.to_string()))?;
        let tv = target_keys
            .iter()
            .find_map(|k| o.get(k))
            .ok_or_else(|| at(format!("entry {i} lacks {:?}", target_keys[0])))?;
        let raw: Vec<&str> = match tv {
            Value::String(s) => vec![s.as_str()],
            Value::Array(a) => a
                .iter()
                .map(|x| x.as_str().ok_or_else(|| at("target id is not a string".into())))
                .collect::<Result<_, _>>()?,
            _ => return Err(at("target ids must be a string or a list".into())),
        };
        let mut targets = Vec::with_capacity(raw.len());
        for t in raw {
            if !direction.target.owns(t) {
                return Err(at(format!("{t} is outside the {} namespaces", direction.target.name)));
            }
            targets.push(Iri::new(t).map_err(|e| at(e.to_string()))?);
        }
        let kind = match o.get("kind") {
            None => MappingKind::Manual,
            Some(k) => serde_json::from_value(k.clone()).map_err(|_| at(format!("unknown kind {k}")))?,
        };
        out.push(TermMapping::new(source_id, targets, kind, Provenance::ManualFile, retrieved_at));
    }
    Ok(out)
}

#[derive(Debug, thiserror::Error)]
pub enum ManualLoadError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

/// Reads and parses a manual mapping file.
pub fn load_manual_mappings(
    path: &Path,
    direction: &TranslationDirection,
) -> Result<Vec<TermMapping>, ManualLoadError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| ManualLoadError::Io { path: path.display().to_string(), source })?;
    let stamp = super::now_rfc3339();
    Ok(parse_manual_mappings(&text, direction, &stamp)?)
}

fn normalize_orcid(s: &str) -> String {
    let s = s.trim();
    let s = s
        .strip_prefix("https://orcid.org/")
        .or_else(|| s.strip_prefix("http://orcid.org/"))
        .unwrap_or(s);
    s.to_ascii_uppercase()
}

/// Joins source and target authors on a shared ORCID.
pub fn orcid_mappings(
    source: &[(Iri, String)],
    target: &[(Iri, String)],
    retrieved_at: &str,
) -> Vec<TermMapping> {
    let mut out: Vec<TermMapping> = Vec::new();
    for (src, orcid) in source {
        let key = normalize_orcid(orcid);
        let hits: Vec<Iri> = target
            .iter()
            .filter(|(_, o)| normalize_orcid(o) == key)
            .map(|(t, _)| t.clone())
            .collect();
        if hits.is_empty() {
            continue;
        }
        match out.iter_mut().find(|m| &m.source_id == src) {
            Some(m) => {
                m.target_ids.extend(hits);
                m.target_ids.sort();
                m.target_ids.dedup();
            }
            None => out.push(TermMapping::new(
                src.clone(),
                hits,
                MappingKind::Orcid,
                Provenance::ManualFile,
                retrieved_at,
            )),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::ProfileRegistry;

    fn dir() -> TranslationDirection {
        ProfileRegistry::with_builtins().direction("DBLP->OpenAlex").unwrap()
    }

    #[test]
    fn parses_kinds_and_lists() {
        let text = r#"[
  {"dblp_id": "https://dblp.org/rdf/schema#authoredBy",
   "openalex_ids": ["https://semopenalex.org/ontology/hasAuthorship", "https://semopenalex.org/ontology/hasAuthor"],
   "kind": "manual"},
  {"dblp_id": "https://dblp.org/pid/01/1", "openalex_id": "https://semopenalex.org/author/A1", "kind": "orcid"}
]"#;
        let m = parse_manual_mappings(text, &dir(), "t").unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].kind, MappingKind::Manual);
        assert_eq!(m[0].target_ids[0].as_str(), "https://semopenalex.org/ontology/hasAuthor");
        assert_eq!(m[1].kind, MappingKind::Orcid);
        assert!(m.iter().all(|x| x.provenance == Provenance::ManualFile));
    }

    #[test]
    fn schema_errors_point_at_entry() {
        let text = "[\n  {\"dblp_id\": \"https://dblp.org/pid/01/1\", \"openalex_ids\": []},\n  {\"openalex_ids\": []}\n]";
        let e = parse_manual_mappings(text, &dir(), "t").unwrap_err();
        assert_eq!((e.line, e.column), (3, 3));
        let e = parse_manual_mappings("[{\"dblp_id\": ", &dir(), "t").unwrap_err();
        assert_eq!(e.line, 1);
        let e = parse_manual_mappings(
            r#"[{"dblp_id": "https://dblp.org/pid/01/1", "openalex_ids": ["http://www.wikidata.org/entity/Q1"]}]"#,
            &dir(),
            "t",
        )
        .unwrap_err();
        assert!(e.message.contains("outside"));
        assert!(parse_manual_mappings("  \n", &dir(), "t").unwrap().is_empty());
    }

    #[test]
    fn orcid_join() {
        let src = vec![
            (Iri::new("https://dblp.org/pid/01/1").unwrap(), "https://orcid.org/0000-0002-1825-009x".to_string()),
            (Iri::new("https://dblp.org/pid/02/2").unwrap(), "0000-0001-0000-0000".to_string()),
        ];
        let tgt = vec![(Iri::new("https://semopenalex.org/author/A9").unwrap(), "0000-0002-1825-009X".to_string())];
        let m = orcid_mappings(&src, &tgt, "t");
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].kind, MappingKind::Orcid);
        assert_eq!(m[0].target_ids[0].as_str(), "https://semopenalex.org/author/A9");
    }
}
