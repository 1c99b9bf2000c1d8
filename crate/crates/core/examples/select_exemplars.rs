//! Clusters the fixture exemplar pool and prints the item nearest each
//! centroid. Uses the hashing embedder unless a vector file is given.
//!
//!     cargo run --example select_exemplars -- [K] [SEED] [VECTORS.vec]

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use sparql_bridge::bench::DatasetManifest;
use sparql_bridge::exemplar::{select_exemplars, EmbedInput, EmbeddingProvider, HashingEmbedder, Metric, PrecomputedEmbeddings};
use sparql_bridge::profile::ProfileRegistry;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let k: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(4);
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(7);
    let vectors_file = args.next();

    let fx = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let dir = ProfileRegistry::with_builtins().direction("DBpedia->Wikidata")?;
    let pool = DatasetManifest::load(&fx.join("bench/pool.json"))?;
    let test = DatasetManifest::load(&fx.join("bench/manifest.json"))?;
    let test_ids: BTreeSet<String> = test.items.iter().map(|i| i.id.clone()).collect();
    let candidates: Vec<_> = pool.items.iter().filter_map(|i| i.to_exemplar(&dir)).collect();

    let vectors: BTreeMap<String, Vec<f64>> = match vectors_file {
        Some(p) => PrecomputedEmbeddings::load(Path::new(&p))?.vectors,
        None => {
            let inputs: Vec<EmbedInput<'_>> = candidates.iter().map(|e| EmbedInput { id: &e.id, text: &e.nlq }).collect();
            candidates.iter().map(|e| e.id.clone()).zip(HashingEmbedder::default().embed(&inputs)?).collect()
        }
    };
    let sel = select_exemplars(&candidates, &vectors, k, &test_ids, seed, Metric::Cosine)?;
    println!("pool {} items, {} iterations, distortion {:?}", sel.pool_ids.len(), sel.model.iterations, sel.model.distortion);
    for (c, e) in sel.exemplars.iter().enumerate() {
        let members: Vec<&str> = sel
            .pool_ids
            .iter()
            .zip(&sel.model.assignments)
            .filter(|(_, &a)| a == c)
            .map(|(id, _)| id.as_str())
            .collect();
        println!("cluster {c}: {} {:?}  members {members:?}", e.id, e.nlq);
    }
    Ok(())
}
