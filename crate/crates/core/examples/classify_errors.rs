//! Pre-screens the hand-labelled taxonomy fixture and prints heuristic
//! labels next to the reference labels, then the co-occurrence counts.
//!
//!     cargo run --example classify_errors

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use sparql_bridge::align::{Er2Doc, Er2Entry};
use sparql_bridge::profile::ProfileRegistry;
use sparql_bridge::sparql::Iri;
use sparql_bridge::taxonomy::{cooccurrence_matrix, prescreen, Annotation, ErrorLabel, ScreenInput};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/taxonomy/cases.json");
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let reg = ProfileRegistry::with_builtins();

    let mut er2s = BTreeMap::new();
    for (key, map) in doc["er2"].as_object().into_iter().flatten() {
        let d = reg.direction(key)?;
        let mut e = Er2Doc::new(d.source.er2_key.clone(), d.target.er2_key.clone());
        for (s, ts) in map.as_object().into_iter().flatten() {
            let target_ids = ts.as_array().into_iter().flatten().filter_map(|t| Iri::new(t.as_str()?).ok()).collect();
            e.entries.push(Er2Entry { source_id: Iri::new(s.as_str())?, target_ids });
        }
        er2s.insert(key.clone(), e);
    }

    let mut anns = Vec::new();
    let mut agree = 0;
    let cases = doc["cases"].as_array().cloned().unwrap_or_default();
    for c in &cases {
        let key = c["direction"].as_str().unwrap_or_default();
        let dir = reg.direction(key)?;
        let gold = doc["golds"][c["gold"].as_str().unwrap_or_default()].as_str().unwrap_or_default();
        let got = prescreen(&ScreenInput {
            candidate: c["candidate"].as_str(),
            gold_query: gold,
            direction: &dir,
            er2: er2s.get(key),
            execution: serde_json::from_value(c["execution"].clone())?,
        });
        let want: BTreeSet<ErrorLabel> = serde_json::from_value(c["labels"].clone())?;
        agree += (got == want) as usize;
        let codes = |s: &BTreeSet<ErrorLabel>| s.iter().map(|l| l.code()).collect::<Vec<_>>().join("+");
        let mark = if got == want { "  " } else { "!=" };
        println!("{} {mark} {:<40} ref {}", c["id"].as_str().unwrap_or("?"), codes(&got), codes(&want));
        anns.push(Annotation::heuristic(c["id"].as_str().unwrap_or("?"), got));
    }
    println!("\n{agree}/{} agree with the reference labels\n", cases.len());

    let m = cooccurrence_matrix(&anns);
    print!("{:<40}", "");
    for i in 1..=8 {
        print!("{i:>4}");
    }
    println!();
    for (i, a) in ErrorLabel::TABLE_ORDER.into_iter().enumerate() {
        print!("{:<40}", format!("{} {}", i + 1, a.code()));
        for b in ErrorLabel::TABLE_ORDER {
            print!("{:>4}", m.count(a, b));
        }
        println!();
    }
    Ok(())
}
