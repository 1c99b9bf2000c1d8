use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BenchError, BenchmarkItem, DatasetManifest, RawItem};
use crate::eval::{QueryExecutor, ResultKind, ResultSet};
use crate::profile::KgProfile;
use crate::sparql::validate_syntax;

#[derive(Debug, Clone)]
pub struct BuildOptions {
    pub name: String,
    pub source_split: String,
    pub snapshot_note: String,
    pub target_n: usize,
    pub seed: u64,
    /// Endpoint calls in flight at once.
    pub parallelism: usize,
    /// Ids kept ahead of random sampling when they pass filtering.
    pub include: Vec<String>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            name: "benchmark".into(),
            source_split: "train".into(),
            snapshot_note: String::new(),
            target_n: 100,
            seed: 0,
            parallelism: 4,
            include: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemVerdict {
    pub id: String,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

/// Keeps items whose query for every KG in `kgs` validates, executes, and
/// returns a non-empty answer of the same kind (and, for bindings, the same
/// arity) as the others; then samples `target_n` of them with `seed`.
pub fn build_benchmark(
    raw: &[RawItem],
    kgs: &[KgProfile],
    executor: &dyn QueryExecutor,
    opts: &BuildOptions,
) -> Result<(DatasetManifest, Vec<ItemVerdict>), BenchError> {
    let mut manifest = DatasetManifest::new(&opts.name, &opts.source_split, &opts.snapshot_note);
    let mut verdicts = Vec::with_capacity(raw.len());

    let mut jobs = Vec::new();
    for (i, it) in raw.iter().enumerate() {
        for kg in kgs {
            if let Some(q) = it.queries.get(&kg.name) {
                if validate_syntax(q).is_ok() {
                    jobs.push((i, kg, q.as_str()));
                }
            }
        }
    }
    let results = crate::util::parallel_map(&jobs, opts.parallelism, |(_, kg, q)| executor.execute(q, &kg.endpoint_url));
    let mut answers: Vec<BTreeMap<&str, Result<ResultSet, String>>> = vec![BTreeMap::new(); raw.len()];
    for ((i, kg, _), r) in jobs.iter().zip(results) {
        answers[*i].insert(kg.name.as_str(), r.map_err(|e| e.code()));
    }

    let mut passing = Vec::new();
    for (i, it) in raw.iter().enumerate() {
        let reason = judge(it, kgs, &answers[i]);
        verdicts.push(ItemVerdict { id: it.id.clone(), passed: reason.is_none(), reason });
        if verdicts[i].passed {
            passing.push(i);
        }
    }
    if passing.len() < opts.target_n {
        return Err(BenchError::InsufficientItems { needed: opts.target_n, available: passing.len() });
    }

    let (mut chosen, rest): (Vec<usize>, Vec<usize>) =
        passing.iter().partition(|&&i| opts.include.iter().any(|id| *id == raw[i].id));
    chosen.truncate(opts.target_n);
    let remaining = opts.target_n - chosen.len();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let picks = rand::seq::index::sample(&mut rng, rest.len(), remaining);
    chosen.extend(picks.into_iter().map(|j| rest[j]));
    chosen.sort_unstable();

    for i in chosen {
        let it = &raw[i];
        let mut query_by_kg = BTreeMap::new();
        let mut gold_by_kg = BTreeMap::new();
        for kg in kgs {
            query_by_kg.insert(kg.name.clone(), it.queries[&kg.name].clone());
            let Some(Ok(rs)) = answers[i].get(kg.name.as_str()) else { unreachable!("passing items have answers") };
            gold_by_kg.insert(kg.name.clone(), rs.clone());
        }
        manifest.items.push(BenchmarkItem {
            id: it.id.clone(),
            nlq: it.nlq.clone(),
            query_by_kg,
            gold_by_kg,
            category: None,
            er2_by_direction: BTreeMap::new(),
        });
    }
    manifest.count = manifest.items.len();
    Ok((manifest, verdicts))
}

fn judge(it: &RawItem, kgs: &[KgProfile], answers: &BTreeMap<&str, Result<ResultSet, String>>) -> Option<String> {
    if kgs.len() < 2 {
        return Some("fewer than two KGs configured".into());
    }
    let mut first: Option<&ResultSet> = None;
    for kg in kgs {
        let Some(q) = it.queries.get(&kg.name) else {
            return Some(format!("no {} query", kg.name));
        };
        if let Err(f) = validate_syntax(q) {
            return Some(format!("{} query invalid: {}", kg.name, f.iter().map(|f| f.code()).collect::<Vec<_>>().join(",")));
        }
        let rs = match answers.get(kg.name.as_str()) {
            Some(Ok(rs)) => rs,
            Some(Err(code)) => return Some(format!("{} execution failed: {code}", kg.name)),
            None => return Some(format!("{} not executed", kg.name)),
        };
        if rs.kind == ResultKind::Bindings && rs.rows.is_empty() {
            return Some(format!("{} answer is empty", kg.name));
        }
        if let Some(f) = first {
            if f.kind != rs.kind {
                return Some("answer kinds differ".into());
            }
            if rs.kind == ResultKind::Bindings && f.arity() != rs.arity() {
                return Some(format!("arity {} vs {}", f.arity(), rs.arity()));
            }
        }
        first = Some(rs);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::{ExecError, RdfTerm};

    /// Answers by query text: "EMPTY" -> no rows, "FAIL" -> 500, "ASK" ->
    /// boolean, "TWO" -> two columns, otherwise one row.
    struct Canned;

    impl QueryExecutor for Canned {
        fn execute(&self, q: &str, _: &str) -> Result<ResultSet, ExecError> {
            if q.contains("FAIL") {
                return Err(ExecError::Endpoint { status: 500, body: String::new() });
            }
            if q.starts_with("ASK") {
                return Ok(ResultSet::boolean(true));
            }
            if q.contains("EMPTY") {
                return Ok(ResultSet::bindings(vec!["x".into()], vec![]));
            }
            let row = |n: usize| (0..n).map(|i| (format!("v{i}"), RdfTerm::iri(format!("http://e/{i}")))).collect();
            let n = if q.contains("TWO") { 2 } else { 1 };
            Ok(ResultSet::bindings((0..n).map(|i| format!("v{i}")).collect(), vec![row(n)]))
        }
    }

    fn item(id: &str, a: &str, b: &str) -> RawItem {
        let mut queries = BTreeMap::new();
        queries.insert("DBpedia".to_string(), a.to_string());
        queries.insert("Wikidata".to_string(), b.to_string());
        RawItem { id: id.into(), nlq: format!("question {id}"), queries, template_id: None }
    }

    fn pool() -> Vec<RawItem> {
        let ok = "SELECT ?x WHERE { ?x ?p ?o }";
        let mut v: Vec<RawItem> = (0..8).map(|i| item(&format!("q{i}"), ok, ok)).collect();
        v.push(item("empty", ok, "SELECT ?x WHERE { ?x ?p ?o } # EMPTY"));
        v.push(item("fail", "SELECT ?x WHERE { ?x ?p ?o } # FAIL", ok));
        v.push(item("arity", ok, "SELECT ?x ?y WHERE { ?x ?p ?y } # TWO"));
        v.push(item("kind", ok, "ASK { ?x ?p ?o }"));
        v
    }

    #[test]
    fn filters_and_samples_deterministically() {
        let kgs = [KgProfile::dbpedia(), KgProfile::wikidata()];
        let opts = BuildOptions { target_n: 5, seed: 7, ..Default::default() };
        let (m1, verdicts) = build_benchmark(&pool(), &kgs, &Canned, &opts).unwrap();
        assert_eq!(verdicts.iter().filter(|v| v.passed).count(), 8);
        for bad in ["empty", "fail", "arity", "kind"] {
            assert!(!verdicts.iter().find(|v| v.id == bad).unwrap().passed, "{bad}");
        }
        assert_eq!(m1.count, 5);
        let (m2, _) = build_benchmark(&pool(), &kgs, &Canned, &BuildOptions { parallelism: 1, ..opts.clone() }).unwrap();
        assert_eq!(m1.to_json(), m2.to_json());
        let (m3, _) = build_benchmark(&pool(), &kgs, &Canned, &BuildOptions { seed: 8, ..opts.clone() }).unwrap();
        assert_eq!(m3.count, 5);
    }

    #[test]
    fn include_zero_and_insufficient() {
        let kgs = [KgProfile::dbpedia(), KgProfile::wikidata()];
        let opts = BuildOptions { target_n: 2, include: vec!["q5".into(), "empty".into()], ..Default::default() };
        let (m, _) = build_benchmark(&pool(), &kgs, &Canned, &opts).unwrap();
        assert!(m.get("q5").is_some());
        let (m, _) = build_benchmark(&pool(), &kgs, &Canned, &BuildOptions { target_n: 0, ..Default::default() }).unwrap();
        assert!(m.items.is_empty());
        assert!(matches!(
            build_benchmark(&pool(), &kgs, &Canned, &BuildOptions { target_n: 9, ..Default::default() }),
            Err(BenchError::InsufficientItems { needed: 9, available: 8 })
        ));
    }
}
