//! Parses a query against a KG profile and prints what the rest of the
//! pipeline sees: form, shape features, classified terms, expanded text.
//!
//!     cargo run --example parse_query -- [KG] [QUERY]

use sparql_bridge::profile::ProfileRegistry;
use sparql_bridge::sparql::{expand_prefixes_with, extract_terms, parse_query_with};

const DEFAULT: &str = "SELECT DISTINCT ?uri WHERE { ?uri a dbo:Film ; dbo:director dbr:Stanley_Kubrick } ORDER BY ?uri";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let kg = args.next().unwrap_or_else(|| "DBpedia".into());
    let text = args.next().unwrap_or_else(|| DEFAULT.into());
    let reg = ProfileRegistry::with_builtins();
    let profile = reg.require(&kg)?;

    let doc = parse_query_with(&text, &profile.prefixes)?;
    println!("form:       {}", doc.form);
    println!("projection: {:?}{}", doc.projected_vars, if doc.wildcard { " (*)" } else { "" });
    println!("ordered:    {}  limit: {}", doc.order_sensitive, doc.has_limit);
    println!("features:   {:?}", doc.features);
    println!("patterns:   {}", doc.patterns.len());
    for f in doc.issues() {
        println!("issue:      {f}");
    }
    for t in extract_terms(&doc, profile) {
        let slots: Vec<String> = t.positions.iter().map(|p| format!("{}:{:?}", p.triple, p.slot)).collect();
        println!("term {:<10} {} [{}]", format!("{:?}", t.role), t.iri, slots.join(" "));
    }
    println!("expanded:   {}", expand_prefixes_with(&doc, &profile.prefixes)?.raw_text);
    Ok(())
}
