//! Writes accuracy and error tables (text, CSV, SVG) for a finished run
//! directory, e.g. the one `run_matrix` leaves in target/fixture-run.
//!
//!     cargo run --example report_tables -- [RUN_DIR] [OUT_DIR]

use std::collections::BTreeSet;
use std::path::PathBuf;

use sparql_bridge::pipeline::load_records;
use sparql_bridge::report::{accuracy_table, emit_outputs, error_report, Format};
use sparql_bridge::taxonomy::Annotation;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let run_dir: PathBuf = args.next().map(Into::into).unwrap_or_else(|| "target/fixture-run".into());
    let out: PathBuf = args.next().map(Into::into).unwrap_or_else(|| run_dir.join("report"));
    let records_path = run_dir.join("records.jsonl");
    if !records_path.exists() {
        return Err(format!("{} not found; run `cargo run --example run_matrix` first", records_path.display()).into());
    }
    let records: Vec<_> = load_records(&records_path)?.into_values().collect();
    let annotations: Vec<Annotation> = std::fs::read_to_string(run_dir.join("annotations.jsonl"))?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect::<Result<_, _>>()?;

    let acc = accuracy_table(&records);
    let err = error_report(&annotations, &records);
    print!("{}\n{}", acc.to_text(), err.to_text());
    let formats: BTreeSet<Format> = [Format::Text, Format::Csv, Format::Svg].into();
    for p in emit_outputs(&acc, &err, &formats, &out)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}
