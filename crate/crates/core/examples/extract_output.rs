//! Runs raw model outputs through extraction, sanitizing and validation.
//! Reads a JSONL file with a `raw` field per line (the shipped corpus by
//! default) or a single output from stdin with `-`.
//!
//!     cargo run --example extract_output -- [CORPUS.jsonl | -]

use std::io::Read;
use std::path::Path;

use sparql_bridge::extract::{extract_candidate, sanitize, validate_candidate};

fn show(id: &str, raw: &str) {
    let r = extract_candidate(raw);
    let Some(q) = r.query_text.as_deref() else {
        println!("{id:<5} failed     {}", r.failure_reason.unwrap_or_default());
        return;
    };
    let clean = sanitize(q);
    let verdict = match validate_candidate(&clean) {
        Ok(()) => "valid".to_string(),
        Err(f) => format!("invalid ({})", f.reason),
    };
    let method = serde_json::to_string(&r.method).unwrap_or_default();
    let note = r.note.map(|n| format!(" [{n}]")).unwrap_or_default();
    println!("{id:<5} {method:<14}{note} {verdict}: {clean}");
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let arg = std::env::args().nth(1);
    if arg.as_deref() == Some("-") {
        let mut raw = String::new();
        std::io::stdin().read_to_string(&mut raw)?;
        show("stdin", &raw);
        return Ok(());
    }
    let path = arg.map(Into::into).unwrap_or_else(|| {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/extraction/corpus.jsonl")
    });
    for line in std::fs::read_to_string(path)?.lines().filter(|l| !l.trim().is_empty()) {
        let v: serde_json::Value = serde_json::from_str(line)?;
        show(v["id"].as_str().unwrap_or("?"), v["raw"].as_str().unwrap_or_default());
    }
    Ok(())
}
