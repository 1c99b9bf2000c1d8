use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceFormat {
    /// QALD exchange JSON: `questions[].question[{language,string}]`,
    /// `questions[].query.sparql`.
    Qald,
    /// DBLP-QuAD JSON: `questions[].question.string`, `query.sparql`,
    /// `template_id`. An optional `queries` object adds other KGs.
    DblpQuad,
}

impl FromStr for SourceFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "qald" => Ok(SourceFormat::Qald),
            "dblp_quad" => Ok(SourceFormat::DblpQuad),
            _ => Err(format!("unknown source format {s:?} (expected qald or dblp_quad)")),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    /// DBLP-QuAD template ids to drop, typically loaded from a data file.
    pub excluded_templates: BTreeSet<String>,
}

impl IngestOptions {
    /// One template id per line; `#` starts a comment.
    pub fn parse_exclusions(text: &str) -> BTreeSet<String> {
        text.lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty())
            .map(str::to_string)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawItem {
    pub id: String,
    pub nlq: String,
    pub queries: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template_id: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub questions: usize,
    pub english: usize,
    pub skipped_non_english: usize,
    pub excluded_templates: usize,
    /// English items with a non-empty query, per KG.
    pub queries_by_kg: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub items: Vec<RawItem>,
    pub counts: SplitCounts,
}

pub fn ingest_source(path: &Path, format: SourceFormat, kg: &str, opts: &IngestOptions) -> Result<IngestReport, BenchError> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::io(path, e))?;
    ingest_str(&text, format, kg, opts)
}

/// Parses one source file whose main query belongs to `kg`.
pub fn ingest_str(text: &str, format: SourceFormat, kg: &str, opts: &IngestOptions) -> Result<IngestReport, BenchError> {
    let root: Value = serde_json::from_str(text).map_err(|e| BenchError::Format { index: 0, message: e.to_string() })?;
    let questions = root
        .get("questions")
        .and_then(Value::as_array)
        .ok_or_else(|| BenchError::Format { index: 0, message: "missing `questions` array".into() })?;
    let mut report = IngestReport::default();
    for (index, q) in questions.iter().enumerate() {
        report.counts.questions += 1;
        let err = |message: &str| BenchError::Format { index, message: message.to_string() };
        let id = match q.get("id") {
            Some(Value::String(s)) if !s.is_empty() => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            _ => return Err(err("missing id")),
        };
        let nlq = match format {
            SourceFormat::Qald => english_qald(q.get("question")).map_err(|m| err(&m))?,
            SourceFormat::DblpQuad => match q.get("question") {
                Some(Value::String(s)) => Some(s.clone()),
                Some(Value::Object(o)) => o.get("string").and_then(Value::as_str).map(str::to_string),
                _ => None,
            },
        };
        let Some(nlq) = nlq.map(|s| s.trim().to_string()).filter(|s| !s.is_empty()) else {
            log::warn!("item {index} ({id}): no English question, skipped");
            report.counts.skipped_non_english += 1;
            continue;
        };
        let template_id = q.get("template_id").and_then(Value::as_str).map(str::to_string);
        if template_id.as_ref().is_some_and(|t| opts.excluded_templates.contains(t)) {
            report.counts.excluded_templates += 1;
            continue;
        }
        report.counts.english += 1;
        let mut queries = BTreeMap::new();
        match q.get("query") {
            Some(Value::Object(o)) => {
                if let Some(s) = o.get("sparql").and_then(Value::as_str).filter(|s| !s.trim().is_empty()) {
                    queries.insert(kg.to_string(), s.trim().to_string());
                }
            }
            Some(Value::String(s)) if !s.trim().is_empty() => {
                queries.insert(kg.to_string(), s.trim().to_string());
            }
            None | Some(Value::Null) | Some(Value::String(_)) => {}
            Some(_) => return Err(err("`query` must be an object or string")),
        }
        if let Some(extra) = q.get("queries") {
            let obj = extra.as_object().ok_or_else(|| err("`queries` must be an object"))?;
            for (k, v) in obj {
                let s = v.as_str().ok_or_else(|| err("`queries` values must be strings"))?;
                if !s.trim().is_empty() {
                    queries.insert(k.clone(), s.trim().to_string());
                }
            }
        }
        for k in queries.keys() {
            *report.counts.queries_by_kg.entry(k.clone()).or_default() += 1;
        }
        report.items.push(RawItem { id, nlq, queries, template_id });
    }
    Ok(report)
}

fn english_qald(v: Option<&Value>) -> Result<Option<String>, String> {
    let Some(v) = v else { return Ok(None) };
    let arr = v.as_array().ok_or("`question` must be an array of {language, string}")?;
    Ok(arr
        .iter()
        .find(|e| e.get("language").and_then(Value::as_str).is_some_and(|l| l.eq_ignore_ascii_case("en")))
        .and_then(|e| e.get("string").and_then(Value::as_str))
        .map(str::to_string))
}

/// Joins per-KG reports of the same split by item id. Counts are recomputed
/// over the union; question counts add up.
pub fn merge_sources(reports: Vec<IngestReport>) -> IngestReport {
    let mut by_id: BTreeMap<String, RawItem> = BTreeMap::new();
    let mut order = Vec::new();
    let mut counts = SplitCounts::default();
    for r in reports {
        counts.questions += r.counts.questions;
        counts.skipped_non_english += r.counts.skipped_non_english;
        counts.excluded_templates += r.counts.excluded_templates;
        for it in r.items {
            match by_id.get_mut(&it.id) {
                Some(existing) => {
                    for (k, q) in it.queries {
                        existing.queries.entry(k).or_insert(q);
                    }
                    if existing.template_id.is_none() {
                        existing.template_id = it.template_id;
                    }
                }
                None => {
                    order.push(it.id.clone());
                    by_id.insert(it.id.clone(), it);
                }
            }
        }
    }
    let items: Vec<RawItem> = order.into_iter().map(|id| by_id.remove(&id).expect("id recorded")).collect();
    counts.english = items.len();
    for it in &items {
        for k in it.queries.keys() {
            *counts.queries_by_kg.entry(k.clone()).or_default() += 1;
        }
    }
    IngestReport { items, counts }
}
