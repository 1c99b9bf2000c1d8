//! The run matrix: every (item, model, strategy, direction) cell goes
//! through prompt -> completion -> extraction -> execution -> comparison ->
//! screening and ends up as one [`RunRecord`].
//!
//! Output directory layout:
//!
//! ```text
//! records.jsonl       one RunRecord per line, sorted by run id
//! annotations.jsonl   labels of every incorrect run (heuristic or merged)
//! failures.jsonl      extraction/validation failure log
//! exemplars/<dir>.json  few-shot selection per direction
//! summary.json        cell counts and the record-set digest
//! ```

mod config;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use config::{CassetteConfig, EvalConfig, ExemplarConfig, LlmParams, RunConfig};

use crate::bench::{BenchError, BenchmarkItem, DatasetManifest, QuestionCategory};
use crate::eval::{compare_results, is_order_sensitive, CompareOptions, ComparisonOutcome, ExecError, QueryExecutor, SparqlClient};
use crate::exemplar::{select_exemplars, EmbedInput, EmbeddingProvider, Exemplar, ExemplarError, HashingEmbedder, PrecomputedEmbeddings, Selection};
use crate::extract::{load_overrides, process_output, ExtractionResult, FailureLog, ValidationFailure};
use crate::llm::{complete, Cassette, ChatBackend, ChatRequest, HttpChatBackend, LlmError};
use crate::profile::{ConfigError, TranslationDirection};
use crate::prompt::{render_prompt_with, validate_spec, PromptSpec, Strategy, TemplateSet};
use crate::sparql::parse_query_with;
use crate::taxonomy::{
    load_sidecar, merge_annotations, prescreen, Annotation, AnnotationSource, ErrorLabel, ExecutionSummary, ScreenInput,
    SidecarError,
};
use crate::util::{sha256_hex, write_atomic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Correct,
    /// Executed, answer differs from gold.
    Incorrect,
    /// No executable query, or execution failed.
    Failed,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Timings {
    pub llm_ms: u64,
    pub exec_ms: u64,
    pub total_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// `item|model|strategy|direction`.
    pub run_id: String,
    pub item_id: String,
    pub model_id: String,
    pub strategy: Strategy,
    pub direction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<QuestionCategory>,
    pub prompt_digest: String,
    pub request_digest: String,
    #[serde(default)]
    pub raw_output: Option<String>,
    #[serde(default)]
    pub finish_reason: Option<String>,
    /// Set when no completion was obtained; the cell counts as unfinished.
    #[serde(default)]
    pub llm_error: Option<String>,
    #[serde(default)]
    pub extraction: Option<ExtractionResult>,
    #[serde(default)]
    pub validation: Option<ValidationFailure>,
    #[serde(default)]
    pub candidate_query: Option<String>,
    pub order_sensitive: bool,
    #[serde(default)]
    pub exec_error: Option<String>,
    #[serde(default)]
    pub candidate_rows: Option<usize>,
    #[serde(default)]
    pub comparison: Option<ComparisonOutcome>,
    pub outcome: Outcome,
    /// Pre-screen labels; empty for correct and unfinished runs.
    #[serde(default)]
    pub heuristic_labels: BTreeSet<ErrorLabel>,
    /// Final labels after merging manual annotations.
    #[serde(default)]
    pub error_labels: BTreeSet<ErrorLabel>,
    #[serde(default)]
    pub label_source: Option<AnnotationSource>,
    /// Wall-clock figures; left out of the record digest.
    #[serde(default)]
    pub timings: Timings,
}

impl RunRecord {
    /// A record with no progress: outcome failed, nothing filled in.
    pub fn new(item_id: &str, model_id: &str, strategy: Strategy, direction: &str) -> Self {
        RunRecord {
            run_id: Self::cell_key(item_id, model_id, strategy, direction),
            item_id: item_id.to_string(),
            model_id: model_id.to_string(),
            strategy,
            direction: direction.to_string(),
            category: None,
            prompt_digest: String::new(),
            request_digest: String::new(),
            raw_output: None,
            finish_reason: None,
            llm_error: None,
            extraction: None,
            validation: None,
            candidate_query: None,
            order_sensitive: false,
            exec_error: None,
            candidate_rows: None,
            comparison: None,
            outcome: Outcome::Failed,
            heuristic_labels: BTreeSet::new(),
            error_labels: BTreeSet::new(),
            label_source: None,
            timings: Timings::default(),
        }
    }

    pub fn cell_key(item: &str, model: &str, strategy: Strategy, direction: &str) -> String {
        format!("{item}|{model}|{strategy}|{direction}")
    }

    /// The model answered (whatever the outcome).
    pub fn is_complete(&self) -> bool {
        self.llm_error.is_none()
    }

    fn stable_json(&self) -> String {
        let mut r = self.clone();
        r.timings = Timings::default();
        serde_json::to_string(&r).expect("record serializes")
    }
}

/// Digest over records in run-id order, timings excluded.
pub fn record_set_digest(records: &[RunRecord]) -> String {
    let mut sorted: Vec<&RunRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    let lines: Vec<String> = sorted.iter().map(|r| r.stable_json()).collect();
    let parts: Vec<&[u8]> = lines.iter().map(|l| l.as_bytes()).collect();
    sha256_hex(&parts)
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error("exemplar selection for {direction}: {source}")]
    Exemplars { direction: String, source: ExemplarError },
    #[error("templates: {0}")]
    Templates(String),
    #[error(transparent)]
    Sidecar(#[from] SidecarError),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.display().to_string(), source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub cells: usize,
    pub new_completions: usize,
    /// Cells without a completion (cassette miss, transport failure...).
    pub unfinished: usize,
    pub record_digest: String,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub records: Vec<RunRecord>,
    pub annotations: Vec<Annotation>,
    pub summary: RunSummary,
}

/// Network access for a run. Tests and examples swap in stubs.
pub struct Backends<'a> {
    pub executor: &'a dyn QueryExecutor,
    pub chat: Option<&'a dyn ChatBackend>,
}

/// Runs the configured matrix with an HTTP SPARQL client and, when
/// `LLM_API_BASE` is set, an HTTP chat backend.
pub fn run_pipeline(cfg: &RunConfig) -> Result<RunResult, PipelineError> {
    let client = SparqlClient::new(Duration::from_secs(cfg.eval.timeout_secs));
    let http = HttpChatBackend::from_env(cfg.llm.retry.clone());
    let backends = Backends { executor: &client, chat: http.as_ref().map(|h| h as &dyn ChatBackend) };
    run_pipeline_with(cfg, &backends)
}

struct Cell<'a> {
    item: &'a BenchmarkItem,
    model: &'a str,
    strategy: Strategy,
    direction: &'a TranslationDirection,
    spec: PromptSpec,
    run_id: String,
}

pub fn run_pipeline_with(cfg: &RunConfig, backends: &Backends<'_>) -> Result<RunResult, PipelineError> {
    let reg = cfg.registry()?;
    let directions = cfg.resolve_directions(&reg)?;
    let manifest = DatasetManifest::load(&cfg.manifest)?;
    let templates = match &cfg.templates {
        Some(dir) => TemplateSet::load_dir(dir).map_err(|e| PipelineError::Templates(e.to_string()))?,
        None => TemplateSet::builtin(),
    };
    let out = &cfg.output_dir;
    std::fs::create_dir_all(out).map_err(io_err(out))?;

    let mut exemplars: BTreeMap<String, Vec<Exemplar>> = BTreeMap::new();
    if cfg.strategies.contains(&Strategy::FewShotEr) {
        let ex_cfg = cfg.exemplars.as_ref().expect("checked by RunConfig::check");
        let pool = DatasetManifest::load(&ex_cfg.pool)?;
        let test_ids: BTreeSet<String> = manifest.items.iter().map(|i| i.id.clone()).collect();
        for d in &directions {
            let sel = select_for_direction(&pool, d, ex_cfg, &test_ids, cfg.seed)
                .map_err(|source| PipelineError::Exemplars { direction: d.key(), source })?;
            let path = out.join("exemplars").join(format!("{}.json", d.key().replace("->", "_to_")));
            let json = serde_json::to_string_pretty(&sel).expect("selection serializes");
            write_atomic(&path, json.as_bytes()).map_err(io_err(&path))?;
            exemplars.insert(d.key(), sel.exemplars);
        }
    }

    let mut cells = Vec::new();
    for item in &manifest.items {
        for model in &cfg.models {
            for &strategy in &cfg.strategies {
                for d in &directions {
                    let spec = build_spec(item, strategy, d, exemplars.get(&d.key()));
                    let run_id = RunRecord::cell_key(&item.id, model, strategy, &d.key());
                    cells.push(Cell { item, model, strategy, direction: d, spec, run_id });
                }
            }
        }
    }
    cells.sort_by(|a, b| a.run_id.cmp(&b.run_id));

    let records_path = out.join("records.jsonl");
    let previous = load_records(&records_path)?;
    let cassette = Cassette::open(&cfg.cassette.path, cfg.cassette.mode).map_err(io_err(&cfg.cassette.path))?;
    let overrides = match &cfg.overrides {
        Some(p) => load_overrides(p).map_err(io_err(p))?,
        None => BTreeMap::new(),
    };
    let failure_log = FailureLog::to_file(out.join("failures.jsonl"));
    let progress = Mutex::new(
        std::fs::OpenOptions::new().create(true).append(true).open(&records_path).map_err(io_err(&records_path))?,
    );
    let ctx = CellContext { cfg, backends, cassette: &cassette, overrides: &overrides, log: &failure_log };

    let results: Vec<(RunRecord, bool)> = crate::util::parallel_map(&cells, cfg.concurrency, |cell| {
        let rendered = render_prompt_with(&cell.spec, &templates);
        let req = ChatRequest::with_params(
            cell.model,
            rendered,
            cfg.llm.system.clone(),
            cfg.llm.temperature,
            cfg.llm.max_tokens,
        );
        if let Some(prev) = previous.get(&cell.run_id) {
            if prev.is_complete() && prev.prompt_digest == req.prompt.spec_digest && prev.request_digest == req.request_digest {
                return (prev.clone(), false);
            }
        }
        let rec = ctx.run_cell(cell, req);
        if let Ok(mut f) = progress.lock() {
            let _ = writeln!(f, "{}", serde_json::to_string(&rec).expect("record serializes"));
        }
        let fresh = rec.is_complete();
        (rec, fresh)
    });
    drop(progress);

    let new_completions = results.iter().filter(|(_, fresh)| *fresh).count();
    let mut records: Vec<RunRecord> = results.into_iter().map(|(r, _)| r).collect();
    let annotations = apply_annotations(&mut records, cfg.annotations.as_deref())?;
    write_jsonl(&records_path, &records)?;
    write_jsonl(&out.join("annotations.jsonl"), &annotations)?;
    let summary = RunSummary {
        cells: records.len(),
        new_completions,
        unfinished: records.iter().filter(|r| !r.is_complete()).count(),
        record_digest: record_set_digest(&records),
    };
    let sp = out.join("summary.json");
    write_atomic(&sp, serde_json::to_string_pretty(&summary).expect("summary serializes").as_bytes()).map_err(io_err(&sp))?;
    Ok(RunResult { records, annotations, summary })
}

/// Embeds the pool questions (precomputed vectors if configured) and picks
/// `k` exemplars that are not test items.
pub fn select_for_direction(
    pool: &DatasetManifest,
    direction: &TranslationDirection,
    cfg: &ExemplarConfig,
    test_ids: &BTreeSet<String>,
    seed: u64,
) -> Result<Selection, ExemplarError> {
    let candidates: Vec<Exemplar> = pool.items.iter().filter_map(|i| i.to_exemplar(direction)).collect();
    let vectors = match &cfg.vectors {
        Some(p) => PrecomputedEmbeddings::load(p)?.vectors,
        None => {
            let inputs: Vec<EmbedInput<'_>> = candidates.iter().map(|e| EmbedInput { id: &e.id, text: &e.nlq }).collect();
            let vs = HashingEmbedder::default().embed(&inputs)?;
            candidates.iter().map(|e| e.id.clone()).zip(vs).collect()
        }
    };
    select_exemplars(&candidates, &vectors, cfg.k, test_ids, seed, cfg.metric)
}

fn build_spec(item: &BenchmarkItem, strategy: Strategy, d: &TranslationDirection, ex: Option<&Vec<Exemplar>>) -> PromptSpec {
    let q1 = item.query_by_kg.get(&d.source.name).cloned().unwrap_or_default();
    let mut spec = PromptSpec::new(strategy, &item.nlq, q1, &d.source.name, &d.target.name);
    if strategy.uses_er2() {
        let er2 = item
            .er2_by_direction
            .get(&d.key())
            .cloned()
            .unwrap_or_else(|| crate::align::Er2Doc::new(d.source.er2_key.clone(), d.target.er2_key.clone()));
        spec = spec.with_er2(er2);
    }
    if strategy == Strategy::FewShotEr {
        spec = spec.with_exemplars(ex.cloned().unwrap_or_default());
    }
    spec
}

struct CellContext<'a> {
    cfg: &'a RunConfig,
    backends: &'a Backends<'a>,
    cassette: &'a Cassette,
    overrides: &'a BTreeMap<String, String>,
    log: &'a FailureLog,
}

impl CellContext<'_> {
    fn run_cell(&self, cell: &Cell<'_>, req: ChatRequest) -> RunRecord {
        let started = Instant::now();
        let d = cell.direction;
        let gold_query = cell.item.query_by_kg.get(&d.target.name);
        let order_sensitive = gold_query
            .and_then(|q| parse_query_with(q, &d.target.prefixes).ok())
            .is_some_and(|doc| is_order_sensitive(&doc));
        let mut rec = RunRecord::new(&cell.item.id, cell.model, cell.strategy, &d.key());
        rec.category = cell.item.category;
        rec.prompt_digest = req.prompt.spec_digest.clone();
        rec.request_digest = req.request_digest.clone();
        rec.order_sensitive = order_sensitive;
        if let Err(findings) = validate_spec(&cell.spec) {
            rec.llm_error = Some(format!("invalid prompt spec: {findings:?}"));
            return rec;
        }
        let resp = match complete(&req, self.cassette, self.backends.chat) {
            Ok(r) => r,
            Err(e) => {
                rec.llm_error = Some(llm_error_text(&e));
                rec.timings.total_ms = started.elapsed().as_millis() as u64;
                return rec;
            }
        };
        rec.timings.llm_ms = resp.latency_ms;
        rec.finish_reason = Some(resp.finish_reason.clone());
        let override_text = self.overrides.get(&cell.run_id).map(String::as_str);
        let processed = process_output(&cell.run_id, &resp.text, override_text, self.log).unwrap_or_else(|e| {
            log::warn!("{}: failure log write failed: {e}", cell.run_id);
            process_output(&cell.run_id, &resp.text, override_text, &FailureLog::in_memory())
                .expect("in-memory log cannot fail")
        });
        rec.raw_output = Some(resp.text);
        rec.extraction = Some(processed.extraction.clone());
        rec.validation = processed.validation.clone();
        rec.candidate_query = processed.candidate.clone();

        let mut summary = ExecutionSummary::NotExecuted;
        if processed.is_executable() {
            let q = processed.candidate.as_deref().expect("executable has candidate");
            let t0 = Instant::now();
            let res = self.backends.executor.execute(q, &d.target.endpoint_url);
            rec.timings.exec_ms = t0.elapsed().as_millis() as u64;
            match res {
                Ok(rs) => {
                    rec.candidate_rows = Some(rs.len());
                    match cell.item.gold_by_kg.get(&d.target.name) {
                        Some(gold) => {
                            let opts = CompareOptions { set_semantics: self.cfg.eval.set_semantics };
                            let cmp = compare_results(gold, &rs, order_sensitive, opts);
                            rec.outcome = if cmp.equal { Outcome::Correct } else { Outcome::Incorrect };
                            summary = if rs.is_empty() { ExecutionSummary::Empty } else { ExecutionSummary::Mismatch };
                            rec.comparison = Some(cmp);
                        }
                        None => {
                            rec.exec_error = Some("missing_gold".into());
                            summary = ExecutionSummary::Failed;
                        }
                    }
                }
                Err(e) => {
                    summary = match &e {
                        ExecError::Endpoint { status, .. } if (400..500).contains(status) => ExecutionSummary::Rejected,
                        _ => ExecutionSummary::Failed,
                    };
                    rec.exec_error = Some(e.code());
                }
            }
        }
        if rec.outcome != Outcome::Correct {
            if let Some(gold) = gold_query {
                let er2 = cell.item.er2_by_direction.get(&d.key());
                rec.heuristic_labels = prescreen(&ScreenInput {
                    candidate: rec.candidate_query.as_deref(),
                    gold_query: gold,
                    direction: d,
                    er2,
                    execution: summary,
                });
            }
        }
        rec.timings.total_ms = started.elapsed().as_millis() as u64;
        rec
    }
}

fn llm_error_text(e: &LlmError) -> String {
    format!("{}: {e}", e.code())
}

/// Execution summary recorded implicitly in a finished record.
pub fn execution_summary(rec: &RunRecord) -> ExecutionSummary {
    match (&rec.exec_error, rec.candidate_rows) {
        (Some(code), _) if code.starts_with("endpoint_4") => ExecutionSummary::Rejected,
        (Some(_), _) => ExecutionSummary::Failed,
        (None, Some(0)) => ExecutionSummary::Empty,
        (None, Some(_)) => ExecutionSummary::Mismatch,
        (None, None) => ExecutionSummary::NotExecuted,
    }
}

/// Re-screens every finished, non-correct record against its manifest item
/// and direction. Used by the `classify` step after heuristics change.
pub fn rescreen(records: &mut [RunRecord], manifest: &DatasetManifest, directions: &[TranslationDirection]) {
    for rec in records.iter_mut().filter(|r| r.is_complete() && r.outcome != Outcome::Correct) {
        let (Some(item), Some(d)) = (manifest.get(&rec.item_id), directions.iter().find(|d| d.key() == rec.direction)) else {
            continue;
        };
        let Some(gold) = item.query_by_kg.get(&d.target.name) else { continue };
        rec.heuristic_labels = prescreen(&ScreenInput {
            candidate: rec.candidate_query.as_deref(),
            gold_query: gold,
            direction: d,
            er2: item.er2_by_direction.get(&d.key()),
            execution: execution_summary(rec),
        });
    }
}

/// Builds annotations from record labels and merges the manual sidecar;
/// merged labels are written back to the records.
pub fn apply_annotations(records: &mut [RunRecord], sidecar: Option<&Path>) -> Result<Vec<Annotation>, PipelineError> {
    let manual = match sidecar {
        Some(p) => load_sidecar(p)?,
        None => BTreeMap::new(),
    };
    let mut out = Vec::new();
    for rec in records.iter_mut() {
        rec.error_labels.clear();
        rec.label_source = None;
        if rec.outcome == Outcome::Correct || rec.heuristic_labels.is_empty() {
            continue;
        }
        let heur = Annotation::heuristic(rec.run_id.clone(), rec.heuristic_labels.clone());
        let merged = merge_annotations(&heur, manual.get(&rec.run_id)).expect("sidecar keyed by run id");
        rec.error_labels = merged.labels.clone();
        rec.label_source = Some(merged.source);
        out.push(merged);
    }
    Ok(out)
}

pub fn load_records(path: &Path) -> Result<BTreeMap<String, RunRecord>, PipelineError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(BTreeMap::new()),
        Err(e) => return Err(io_err(path)(e)),
    };
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RunRecord>(line) {
            Ok(r) => {
                out.insert(r.run_id.clone(), r);
            }
            // A torn last line after a crash is dropped; that cell reruns.
            Err(e) => log::warn!("{}:{}: skipping unreadable record: {e}", path.display(), i + 1),
        }
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), PipelineError> {
    let mut buf = String::new();
    for r in rows {
        buf.push_str(&serde_json::to_string(r).expect("row serializes"));
        buf.push('\n');
    }
    write_atomic(path, buf.as_bytes()).map_err(io_err(path))
}

#[cfg(test)]
mod tests;
