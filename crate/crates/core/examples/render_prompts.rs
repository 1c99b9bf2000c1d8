//! Renders one fixture benchmark item under every prompting strategy.
//!
//!     cargo run --example render_prompts -- [ITEM_ID] [STRATEGY]

use std::collections::BTreeSet;
use std::path::Path;

use sparql_bridge::bench::DatasetManifest;
use sparql_bridge::pipeline::{select_for_direction, ExemplarConfig};
use sparql_bridge::profile::ProfileRegistry;
use sparql_bridge::prompt::{render_prompt, validate_spec, PromptSpec, Strategy};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let id = args.next().unwrap_or_else(|| "1".into());
    let show: Option<Strategy> = args.next().map(|s| s.parse()).transpose()?;

    let fx = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let d = ProfileRegistry::with_builtins().direction("DBpedia->Wikidata")?;
    let manifest = DatasetManifest::load(&fx.join("bench/manifest.json"))?;
    let item = manifest.get(&id).ok_or_else(|| format!("no item {id}"))?;
    let pool = DatasetManifest::load(&fx.join("bench/pool.json"))?;
    let test_ids: BTreeSet<String> = manifest.items.iter().map(|i| i.id.clone()).collect();
    let ex_cfg = ExemplarConfig { pool: fx.join("bench/pool.json"), vectors: None, k: 4, metric: Default::default() };
    let exemplars = select_for_direction(&pool, &d, &ex_cfg, &test_ids, 7)?.exemplars;

    for s in Strategy::ALL {
        let mut spec = PromptSpec::new(s, &item.nlq, &item.query_by_kg[&d.source.name], &d.source.name, &d.target.name);
        if s.uses_er2() {
            spec = spec.with_er2(item.er2_by_direction[&d.key()].clone());
        }
        if s == Strategy::FewShotEr {
            spec = spec.with_exemplars(exemplars.clone());
        }
        if let Err(findings) = validate_spec(&spec) {
            println!("{s}: invalid spec {findings:?}");
            continue;
        }
        let p = render_prompt(&spec);
        println!("{:<11} {} chars  digest {}", s.name(), p.text.len(), &p.spec_digest[..16]);
        if show == Some(s) {
            println!("{}\n", p.text);
        }
    }
    Ok(())
}
