//! Looks up target-KG equivalents for the terms of a DBpedia query against
//! the stub DBpedia graph, then answers the same lookup from the cache
//! alone.
//!
//!     cargo run --example align_terms -- [QUERY]

use std::path::Path;
use std::time::Duration;

use sparql_bridge::align::{build_er2, coverage_stats, source_terms, Aligner, Er2Style, MappingCache};
use sparql_bridge::eval::SparqlClient;
use sparql_bridge::profile::ProfileRegistry;
use sparql_bridge::stub::SparqlStub;

const DEFAULT: &str = "SELECT DISTINCT ?uri WHERE { ?uri a dbo:Film ; dbo:director dbr:Stanley_Kubrick . ?uri dbo:producer ?p }";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let query = std::env::args().nth(1).unwrap_or_else(|| DEFAULT.into());
    let fx = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let reg = ProfileRegistry::with_builtins();
    let mut dir = reg.direction("DBpedia->Wikidata")?;
    let stub = SparqlStub::for_profile(&std::fs::read_to_string(fx.join("kg/dbpedia.ttl"))?, &dir.source)?;
    dir.source.endpoint_url = stub.url();

    let tmp = std::env::temp_dir().join(format!("align-terms-{}.jsonl", std::process::id()));
    let cache = MappingCache::open(&tmp)?;
    let client = SparqlClient::new(Duration::from_secs(10));
    let terms = source_terms(&query, &dir.source)?;
    for t in &terms {
        println!("term {:?} {}", t.role, t.iri);
    }
    let er2 = build_er2(&terms, &dir, &Aligner::new(&cache, &client))?;
    println!("{}", er2.render(Er2Style::Prompt));
    println!("endpoint requests: {}", stub.traffic().requests());

    drop(stub);
    let warm = build_er2(&terms, &dir, &Aligner::offline(&cache))?;
    println!("offline rerun identical: {}", warm == er2);
    let cov = coverage_stats([query.as_str()], &dir, &cache);
    println!("coverage: {}/{} mapped, unmapped {:?}", cov.mapped, cov.total_terms, cov.unmapped_list);
    let _ = std::fs::remove_file(tmp);
    Ok(())
}
