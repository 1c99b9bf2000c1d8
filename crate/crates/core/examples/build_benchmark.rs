//! Builds the fixture benchmark: ingest two QALD-style files, keep items
//! whose queries run on both stub KGs, attach categories and er2 mappings.
//!
//!     cargo run --example build_benchmark -- [OUT_DIR]

use std::path::{Path, PathBuf};
use std::time::Duration;

use sparql_bridge::align::{build_er2, source_terms, Aligner, MappingCache};
use sparql_bridge::bench::{
    attach_categories, build_benchmark, ingest_source, merge_sources, BuildOptions, CategoryDistribution,
    IngestOptions, SourceFormat,
};
use sparql_bridge::eval::SparqlClient;
use sparql_bridge::profile::ProfileRegistry;
use sparql_bridge::stub::SparqlStub;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fx = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let out: PathBuf = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| "target/fixture-bench".into());
    std::fs::create_dir_all(&out)?;

    let mut reg = ProfileRegistry::with_builtins();
    let dbpedia = SparqlStub::for_profile(&std::fs::read_to_string(fx.join("kg/dbpedia.ttl"))?, reg.require("DBpedia")?)?;
    let wikidata = SparqlStub::for_profile(&std::fs::read_to_string(fx.join("kg/wikidata.ttl"))?, reg.require("Wikidata")?)?;
    reg.set_endpoint("DBpedia", dbpedia.url())?;
    reg.set_endpoint("Wikidata", wikidata.url())?;

    let opts = IngestOptions::default();
    let db = ingest_source(&fx.join("qald/train_dbpedia.json"), SourceFormat::Qald, "DBpedia", &opts)?;
    let wd = ingest_source(&fx.join("qald/train_wikidata.json"), SourceFormat::Qald, "Wikidata", &opts)?;
    let raw = merge_sources(vec![db, wd]);
    println!("ingested: {:?}", raw.counts);

    let kgs = [reg.require("DBpedia")?.clone(), reg.require("Wikidata")?.clone()];
    let build = BuildOptions {
        name: "fixture-qald".into(),
        source_split: "train".into(),
        snapshot_note: "stub graphs tests/fixtures/kg/*.ttl".into(),
        target_n: 10,
        seed: 7,
        ..BuildOptions::default()
    };
    let client = SparqlClient::new(Duration::from_secs(10));
    let (manifest, verdicts) = build_benchmark(&raw.items, &kgs, &client, &build)?;
    for v in verdicts.iter().filter(|v| !v.passed) {
        println!("dropped {}: {}", v.id, v.reason.as_deref().unwrap_or("?"));
    }
    let mut manifest = attach_categories(manifest, &std::fs::read_to_string(fx.join("qald/categories.tsv"))?)?;
    print!("{}", CategoryDistribution::of(&manifest));

    let d = reg.direction("DBpedia->Wikidata")?;
    let cache = MappingCache::open(out.join("mappings.jsonl"))?;
    let aligner = Aligner::new(&cache, &client).with_clock(|| "fixture".into());
    for item in &mut manifest.items {
        let terms = source_terms(&item.query_by_kg["DBpedia"], &d.source)?;
        item.er2_by_direction.insert(d.key(), build_er2(&terms, &d, &aligner)?);
    }
    let path = out.join("manifest.json");
    manifest.save(&path)?;
    println!("wrote {} items to {}", manifest.count, path.display());
    Ok(())
}
