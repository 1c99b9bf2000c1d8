use std::sync::atomic::{AtomicUsize, Ordering};

use super::*;
use crate::eval::{RdfTerm, ResultSet};
use crate::extract::sanitize;
use crate::llm::{CassetteMode, ChatResponse, TokenUsage};

/// One row whose value is the sanitized query text, so a candidate is
/// correct exactly when it matches the gold text.
struct Echo;

impl QueryExecutor for Echo {
    fn execute(&self, q: &str, _: &str) -> Result<ResultSet, ExecError> {
        if q.contains("BROKEN") {
            return Err(ExecError::Endpoint { status: 400, body: "parse error".into() });
        }
        let v = format!("urn:q:{}", sanitize(q).len());
        let mut row = crate::eval::Row::new();
        row.insert("x".into(), RdfTerm::iri(v));
        Ok(ResultSet::bindings(vec!["x".into()], vec![row]))
    }
}

/// Answers with the gold Wikidata query of the item named in the prompt
/// when the item number is even, otherwise with a variant.
struct Model {
    calls: AtomicUsize,
}

impl ChatBackend for Model {
    fn send(&self, req: &ChatRequest) -> Result<ChatResponse, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let n: usize = req.prompt.text.split("question number ").nth(1).and_then(|s| s[..1].parse().ok()).unwrap_or(0);
        let q = if n % 2 == 0 { gold(n) } else { format!("SELECT ?x WHERE {{ ?x wdt:P{n}{n} wd:Q1 }}") };
        Ok(ChatResponse {
            text: format!("Sure.\n<sparql>{q}</sparql>"),
            finish_reason: "stop".into(),
            latency_ms: 5,
            token_usage: TokenUsage::default(),
        })
    }
}

fn gold(n: usize) -> String {
    format!("SELECT ?x WHERE {{ ?x wdt:P{n} wd:Q1 }}")
}

fn manifest() -> DatasetManifest {
    let mut m = DatasetManifest::new("t", "train", "");
    for n in 0..6 {
        let mut item = BenchmarkItem {
            id: format!("q{n}"),
            nlq: format!("question number {n}"),
            query_by_kg: BTreeMap::new(),
            gold_by_kg: BTreeMap::new(),
            category: None,
            er2_by_direction: BTreeMap::new(),
        };
        item.query_by_kg.insert("DBpedia".into(), format!("SELECT ?x WHERE {{ ?x dbo:p{n} dbr:A }}"));
        item.query_by_kg.insert("Wikidata".into(), gold(n));
        item.gold_by_kg.insert("Wikidata".into(), Echo.execute(&gold(n), "").unwrap());
        m.items.push(item);
    }
    m.count = m.items.len();
    m
}

fn config(dir: &Path, mode: CassetteMode) -> RunConfig {
    let mpath = dir.join("manifest.json");
    manifest().save(&mpath).unwrap();
    let text = format!(
        "seed = 1\nmanifest = \"manifest.json\"\noutput_dir = \"out\"\nmodels = [\"m\"]\n\
         strategies = [\"ZeroShot\", \"ZeroShotER\"]\ndirections = [\"DBpedia->Wikidata\"]\n\
         [cassette]\npath = \"c.jsonl\"\nmode = \"{}\"\n",
        match mode {
            CassetteMode::Record => "record",
            CassetteMode::Replay => "replay",
            CassetteMode::Passthrough => "passthrough",
        }
    );
    RunConfig::parse(&text, dir).unwrap()
}

#[test]
fn matrix_resume_and_replay() {
    let dir = tempfile::tempdir().unwrap();
    let model = Model { calls: AtomicUsize::new(0) };
    let rec_cfg = config(dir.path(), CassetteMode::Record);
    let first = run_pipeline_with(&rec_cfg, &Backends { executor: &Echo, chat: Some(&model) }).unwrap();
    assert_eq!(first.records.len(), 12);
    assert_eq!(first.summary.new_completions, 12);
    assert_eq!(first.summary.unfinished, 0);
    assert_eq!(first.records.iter().filter(|r| r.outcome == Outcome::Correct).count(), 6);
    for r in &first.records {
        assert_eq!(r.outcome == Outcome::Correct, r.error_labels.is_empty(), "{}", r.run_id);
    }
    assert_eq!(first.annotations.len(), 6);
    let ids: Vec<&str> = first.records.iter().map(|r| r.run_id.as_str()).collect();
    let mut sorted = ids.clone();
    sorted.sort();
    assert_eq!(ids, sorted);

    // Resume: nothing new, same digest.
    let again = run_pipeline_with(&rec_cfg, &Backends { executor: &Echo, chat: Some(&model) }).unwrap();
    assert_eq!(again.summary.new_completions, 0);
    assert_eq!(again.summary.record_digest, first.summary.record_digest);
    assert_eq!(model.calls.load(Ordering::SeqCst), 12);

    // Fresh output dir, replay only.
    let mut rep = config(dir.path(), CassetteMode::Replay);
    rep.output_dir = dir.path().join("out2");
    let replayed = run_pipeline_with(&rep, &Backends { executor: &Echo, chat: None }).unwrap();
    assert_eq!(replayed.summary.record_digest, first.summary.record_digest);
    let on_disk = load_records(&rep.output_dir.join("records.jsonl")).unwrap();
    assert_eq!(on_disk.len(), 12);
}

#[test]
fn cassette_miss_leaves_cell_unfinished() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.jsonl"), "").unwrap();
    let cfg = config(dir.path(), CassetteMode::Replay);
    let r = run_pipeline_with(&cfg, &Backends { executor: &Echo, chat: None }).unwrap();
    assert_eq!(r.summary.unfinished, 12);
    assert!(r.records.iter().all(|r| r.llm_error.as_deref().unwrap().starts_with("cassette_miss")));
    assert!(r.annotations.is_empty());
}

#[test]
fn manual_sidecar_wins() {
    let dir = tempfile::tempdir().unwrap();
    let model = Model { calls: AtomicUsize::new(0) };
    let mut cfg = config(dir.path(), CassetteMode::Record);
    let side = dir.path().join("manual.jsonl");
    let mut a = Annotation::heuristic("q1|m|ZeroShot|DBpedia->Wikidata", [ErrorLabel::WrongOrMissingEntity].into());
    a.source = AnnotationSource::Manual;
    crate::taxonomy::append_sidecar(&side, &a).unwrap();
    cfg.annotations = Some(side);
    let r = run_pipeline_with(&cfg, &Backends { executor: &Echo, chat: Some(&model) }).unwrap();
    let rec = r.records.iter().find(|x| x.run_id == a.run_id).unwrap();
    assert_eq!(rec.error_labels, a.labels);
    assert_eq!(rec.label_source, Some(AnnotationSource::Merged));
    assert!(!rec.heuristic_labels.is_empty());
}
