//! Exact-match comparison of two SPARQL JSON result files, or of a built-in
//! pair that differs only in variable names, column order, literal spelling
//! and blank node labels.
//!
//!     cargo run --example compare_results -- [GOLD.json CANDIDATE.json [--ordered]]

use sparql_bridge::eval::{compare_results, CompareOptions, ResultSet};

const GOLD: &str = r#"{"head":{"vars":["film","year"]},"results":{"bindings":[
 {"film":{"type":"uri","value":"http://www.wikidata.org/entity/Q186341"},"year":{"type":"literal","value":"1980","datatype":"http://www.w3.org/2001/XMLSchema#integer"}},
 {"film":{"type":"bnode","value":"b0"},"year":{"type":"literal","value":"1.5E3","datatype":"http://www.w3.org/2001/XMLSchema#double"}}]}}"#;

const CANDIDATE: &str = r#"{"head":{"vars":["y","f"]},"results":{"bindings":[
 {"f":{"type":"bnode","value":"node17"},"y":{"type":"literal","value":"1500.0","datatype":"http://www.w3.org/2001/XMLSchema#double"}},
 {"f":{"type":"uri","value":"http://www.wikidata.org/entity/Q186341"},"y":{"type":"literal","value":"01980","datatype":"http://www.w3.org/2001/XMLSchema#int"}}]}}"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let ordered = args.iter().any(|a| a == "--ordered");
    let files: Vec<&String> = args.iter().filter(|a| !a.starts_with("--")).collect();
    let (gold, cand) = match files.as_slice() {
        [g, c] => (std::fs::read_to_string(g)?, std::fs::read_to_string(c)?),
        _ => (GOLD.to_string(), CANDIDATE.to_string()),
    };
    let gold = ResultSet::parse(&gold)?;
    let cand = ResultSet::parse(&cand)?;
    let out = compare_results(&gold, &cand, ordered, CompareOptions::default());
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}
