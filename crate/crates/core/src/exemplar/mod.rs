//! Few-shot exemplar selection: embed pool questions, cluster them with
//! k-means, take the item nearest each centroid.

mod embed;
mod kmeans;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use embed::{
    embed_texts, EmbedInput, EmbeddingProvider, EmbeddingVector, HashingEmbedder, HttpEmbedder,
    PrecomputedEmbeddings,
};
pub use kmeans::{cluster_kmeans, wcss, ClusterModel, Metric};

use crate::align::Er2Doc;

/// A complete translation example for few-shot prompts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub id: String,
    pub nlq: String,
    pub query_kg1: String,
    pub query_kg2: String,
    pub er2: Er2Doc,
}

#[derive(Debug, thiserror::Error)]
pub enum ExemplarError {
    #[error("no texts to embed")]
    EmptyInput,
    #[error("embedding provider failed: {0}")]
    Provider(String),
    #[error("vector {id:?} has dimension {found}, expected {expected}")]
    DimensionMismatch { id: String, expected: usize, found: usize },
    #[error("vector {id:?} has a non-finite component")]
    NonFinite { id: String },
    #[error("no vector for {0:?}")]
    MissingVector(String),
    #[error("pool has {available} items after exclusion, need {needed}")]
    PoolTooSmall { needed: usize, available: usize },
    #[error("selected exemplars overlap the test set: {0:?}")]
    Leakage(Vec<String>),
    #[error("vector file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// One per cluster, ordered by cluster index.
    pub exemplars: Vec<Exemplar>,
    pub model: ClusterModel,
    /// Ids of the clustered pool, in clustering order.
    pub pool_ids: Vec<String>,
}

/// Picks `k` exemplars from `pool`, excluding every id in `test_ids`.
/// `vectors` maps exemplar id to its embedding.
pub fn select_exemplars(
    pool: &[Exemplar],
    vectors: &BTreeMap<String, Vec<f64>>,
    k: usize,
    test_ids: &BTreeSet<String>,
    seed: u64,
    metric: Metric,
) -> Result<Selection, ExemplarError> {
    let mut eligible: Vec<&Exemplar> = pool.iter().filter(|e| !test_ids.contains(&e.id)).collect();
    eligible.sort_by(|a, b| a.id.cmp(&b.id));
    eligible.dedup_by(|a, b| a.id == b.id);
    if k == 0 || eligible.len() < k {
        return Err(ExemplarError::PoolTooSmall { needed: k.max(1), available: eligible.len() });
    }
    let mut points = Vec::with_capacity(eligible.len());
    for e in &eligible {
        let v = vectors.get(&e.id).ok_or_else(|| ExemplarError::MissingVector(e.id.clone()))?;
        points.push(v.clone());
    }
    let model = cluster_kmeans(&points, k, seed, metric)?;
    let points = metric.prepare(&points);
    let mut exemplars = Vec::with_capacity(k);
    for c in 0..k {
        // Members are visited in id order, so a strict `<` keeps the lowest
        // id on ties.
        let mut best: Option<(usize, f64)> = None;
        for (i, _) in model.assignments.iter().enumerate().filter(|(_, &a)| a == c) {
            let d = kmeans::sq_dist(&points[i], &model.centroids[c]);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((i, d));
            }
        }
        let (i, _) = best.expect("repair leaves no cluster empty");
        exemplars.push(eligible[i].clone());
    }
    check_leakage(&exemplars, test_ids)?;
    Ok(Selection { exemplars, model, pool_ids: eligible.iter().map(|e| e.id.clone()).collect() })
}

pub fn check_leakage(selected: &[Exemplar], test_ids: &BTreeSet<String>) -> Result<(), ExemplarError> {
    let leaked: Vec<String> = selected.iter().filter(|e| test_ids.contains(&e.id)).map(|e| e.id.clone()).collect();
    if leaked.is_empty() {
        Ok(())
    } else {
        Err(ExemplarError::Leakage(leaked))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ex(id: &str) -> Exemplar {
        Exemplar {
            id: id.into(),
            nlq: format!("question {id}"),
            query_kg1: "SELECT ?x WHERE { ?x ?p ?o }".into(),
            query_kg2: "SELECT ?x WHERE { ?x ?p ?o }".into(),
            er2: Er2Doc::new("dbpedia", "wikidata"),
        }
    }

    fn square() -> (Vec<Exemplar>, BTreeMap<String, Vec<f64>>) {
        let pts = [("a", [0.0, 0.0]), ("b", [1.0, 0.0]), ("c", [0.0, 1.0]), ("d", [1.0, 1.0]), ("t", [0.5, 0.5])];
        let pool = pts.iter().map(|(id, _)| ex(id)).collect();
        let vecs = pts.iter().map(|(id, v)| (id.to_string(), v.to_vec())).collect();
        (pool, vecs)
    }

    #[test]
    fn forced_pool_and_leakage_exclusion() {
        let (pool, vecs) = square();
        let test: BTreeSet<String> = ["t".to_string()].into();
        let sel = select_exemplars(&pool, &vecs, 4, &test, 7, Metric::Euclidean).unwrap();
        let mut ids: Vec<_> = sel.exemplars.iter().map(|e| e.id.as_str()).collect();
        ids.sort();
        assert_eq!(ids, ["a", "b", "c", "d"]);
        assert!(!sel.pool_ids.contains(&"t".to_string()));
        let test: BTreeSet<String> = ["a".to_string(), "t".to_string()].into();
        assert!(matches!(
            select_exemplars(&pool, &vecs, 4, &test, 7, Metric::Euclidean),
            Err(ExemplarError::PoolTooSmall { needed: 4, available: 3 })
        ));
    }

    #[test]
    fn selection_is_deterministic() {
        let (pool, vecs) = square();
        let none = BTreeSet::new();
        let a = select_exemplars(&pool, &vecs, 2, &none, 3, Metric::Euclidean).unwrap();
        let b = select_exemplars(&pool, &vecs, 2, &none, 3, Metric::Euclidean).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn leakage_check_reports_ids() {
        let test: BTreeSet<String> = ["b".to_string()].into();
        match check_leakage(&[ex("a"), ex("b")], &test) {
            Err(ExemplarError::Leakage(ids)) => assert_eq!(ids, ["b"]),
            other => panic!("{other:?}"),
        }
    }
}
