//! Runs the fixture matrix (10 items x ZeroShotER/FewShotER x one model)
//! offline: gold and candidates execute on a stub Wikidata endpoint and
//! model replies come from the shipped cassette.
//!
//!     cargo run --example run_matrix -- [OUT_DIR]
//!     cargo run --example run_matrix -- --record [OUT_DIR]
//!
//! `--record` answers prompts from tests/fixtures/e2e/model_answers.json
//! through a stub chat API and rewrites the cassette.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde_json::Value;
use sparql_bridge::bench::DatasetManifest;
use sparql_bridge::eval::SparqlClient;
use sparql_bridge::llm::{CassetteMode, ChatBackend, HttpChatBackend, RetryPolicy};
use sparql_bridge::pipeline::{run_pipeline_with, Backends, RunConfig};
use sparql_bridge::prompt::FEW_SHOT_SUFFIX;
use sparql_bridge::report::{accuracy_table, error_report};
use sparql_bridge::stub::{ChatReply, ChatStub, SparqlStub};
use sparql_bridge::KgProfile;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fx = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let mut args: Vec<String> = std::env::args().skip(1).collect();
    let record = args.iter().any(|a| a == "--record");
    args.retain(|a| a != "--record");
    let out: PathBuf = args.first().map(PathBuf::from).unwrap_or_else(|| "target/fixture-run".into());

    let wikidata = SparqlStub::for_profile(&std::fs::read_to_string(fx.join("kg/wikidata.ttl"))?, &KgProfile::wikidata())?;
    let mut cfg = RunConfig::load(&fx.join("e2e/run.toml"))?;
    cfg.output_dir = out.clone();
    cfg.endpoints.insert("Wikidata".into(), wikidata.url());

    let chat_stub;
    let http;
    let mut chat: Option<&dyn ChatBackend> = None;
    if record {
        let manifest = DatasetManifest::load(&cfg.manifest)?;
        let answers: Value = serde_json::from_str(&std::fs::read_to_string(fx.join("e2e/model_answers.json"))?)?;
        let questions: Vec<(String, String)> = manifest.items.iter().map(|i| (i.id.clone(), i.nlq.clone())).collect();
        chat_stub = ChatStub::start(move |req| {
            let strategy = if req.prompt.contains(FEW_SHOT_SUFFIX.trim()) { "FewShotER" } else { "ZeroShotER" };
            let hit: Vec<&String> = questions.iter().filter(|(_, q)| req.prompt.contains(q.as_str())).map(|(id, _)| id).collect();
            match (hit.as_slice(), answers["answers"][strategy].as_object()) {
                ([id], Some(by_id)) => match by_id.get(id.as_str()).and_then(Value::as_str) {
                    Some(text) => ChatReply::Text(text.to_string()),
                    None => ChatReply::Status(404, format!("no scripted answer for {strategy}/{id}")),
                },
                _ => ChatReply::Status(400, "prompt matches no single test question".into()),
            }
        })?;
        http = HttpChatBackend::new(chat_stub.base_url(), None, RetryPolicy { attempts: 1, ..RetryPolicy::default() });
        chat = Some(&http);
        // A fresh recording replaces the old cassette.
        let _ = std::fs::remove_file(&cfg.cassette.path);
        let _ = std::fs::remove_dir_all(&out);
        cfg.cassette.mode = CassetteMode::Record;
    }

    let client = SparqlClient::new(Duration::from_secs(10));
    let result = run_pipeline_with(&cfg, &Backends { executor: &client, chat })?;
    println!("{:?}", result.summary);
    print!("{}", accuracy_table(&result.records).to_text());
    print!("{}", error_report(&result.annotations, &result.records).to_text());
    Ok(())
}
