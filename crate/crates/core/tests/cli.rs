//! Drives the binary end to end against the fixture stubs.

#![cfg(feature = "stub")]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sparql_bridge::pipeline::RunConfig;
use sparql_bridge::profile::{profiles_to_toml, KgProfile, ProfileRegistry};
use sparql_bridge::stub::SparqlStub;

fn fx(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparql-bridge")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn prompt_render_matches_library() {
    let o = bin(&[
        "prompt", "render", "--manifest", p(&fx("bench/manifest.json")), "--item", "1",
        "--strategy", "ZeroShotER", "--direction", "DBpedia->Wikidata", "--digest",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("\"er2\": [{\"dbpedia_id\""));
    assert!(text.contains("<sparql>"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("spec digest: "));

    let o = bin(&[
        "prompt", "render", "--manifest", p(&fx("bench/manifest.json")), "--item", "1",
        "--strategy", "FewShotER", "--direction", "DBpedia->Wikidata",
    ]);
    assert_eq!(o.status.code(), Some(2), "FewShotER without --exemplars must fail");
}

#[test]
fn exemplars_then_few_shot_prompt() {
    let tmp = tempfile::tempdir().unwrap();
    let sel = tmp.path().join("sel.json");
    let o = bin(&[
        "exemplars", "select", "--pool", p(&fx("bench/pool.json")), "--test", p(&fx("bench/manifest.json")),
        "--direction", "DBpedia->Wikidata", "--k", "4", "--seed", "7", "--metric", "cosine", "--out", p(&sel),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(stdout(&o).lines().count(), 4);
    let o = bin(&[
        "prompt", "render", "--manifest", p(&fx("bench/manifest.json")), "--item", "2",
        "--strategy", "FewShotER", "--direction", "DBpedia->Wikidata", "--exemplars", p(&sel),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("Here are 4 examples:") && text.contains("Example 4:"));
}

#[test]
fn align_offline_needs_cache() {
    let tmp = tempfile::tempdir().unwrap();
    let cache = tmp.path().join("m.jsonl");
    let q = "SELECT ?x WHERE { ?x dbo:director dbr:Stanley_Kubrick }";
    let o = bin(&["align", "extract", "--direction", "DBpedia->Wikidata", "--cache", p(&cache), "--query", q, "--offline"]);
    assert_eq!(o.status.code(), Some(2));

    let reg = ProfileRegistry::with_builtins();
    let stub = SparqlStub::for_profile(&std::fs::read_to_string(fx("kg/dbpedia.ttl")).unwrap(), reg.require("DBpedia").unwrap())
        .unwrap();
    let profiles = tmp.path().join("profiles.toml");
    let mut dbp = KgProfile::dbpedia();
    dbp.endpoint_url = stub.url();
    std::fs::write(&profiles, profiles_to_toml(&[dbp])).unwrap();
    let o = bin(&[
        "--profiles", p(&profiles), "align", "extract", "--direction", "DBpedia->Wikidata", "--cache", p(&cache), "--query", q,
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("http://www.wikidata.org/entity/Q2001"));
    drop(stub);
    let o = bin(&["align", "extract", "--direction", "DBpedia->Wikidata", "--cache", p(&cache), "--query", q, "--offline"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn run_classify_report() {
    let tmp = tempfile::tempdir().unwrap();
    let reg = ProfileRegistry::with_builtins();
    let stub = SparqlStub::for_profile(&std::fs::read_to_string(fx("kg/wikidata.ttl")).unwrap(), reg.require("Wikidata").unwrap())
        .unwrap();
    let mut cfg = RunConfig::load(&fx("e2e/run.toml")).unwrap();
    cfg.output_dir = tmp.path().join("run");
    cfg.endpoints.insert("Wikidata".into(), stub.url());
    let cfg_path = tmp.path().join("run.toml");
    std::fs::write(&cfg_path, cfg.to_toml()).unwrap();

    let o = bin(&["run", "--config", p(&cfg_path)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("20 cells, 20 newly completed, 0 unfinished"), "{}", stdout(&o));
    // Everything is on disk now, so a rerun resumes without new work.
    let o = bin(&["run", "--config", p(&cfg_path)]);
    assert!(stdout(&o).contains("0 newly completed"), "{}", stdout(&o));

    let o = bin(&["classify", "--config", p(&cfg_path)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = tmp.path().join("report");
    let o = bin(&["report", "--run-dir", p(&cfg.output_dir), "--out", p(&out), "--formats", "text,csv"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let acc = std::fs::read_to_string(out.join("accuracy.csv")).unwrap();
    assert!(acc.contains("DBpedia->Wikidata,fixture-model,FewShotER,8,"), "{acc}");
    assert!(acc.contains("DBpedia->Wikidata,fixture-model,ZeroShotER,5,"), "{acc}");
    assert!(!out.join("accuracy.svg").exists());
}

#[test]
fn replay_miss_leaves_cells_unfinished() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::load(&fx("e2e/run.toml")).unwrap();
    cfg.output_dir = tmp.path().join("run");
    cfg.models = vec!["unrecorded-model".into()];
    let cfg_path = tmp.path().join("run.toml");
    std::fs::write(&cfg_path, cfg.to_toml()).unwrap();
    let o = bin(&["run", "--config", p(&cfg_path)]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stdout(&o).contains("20 unfinished"));
}

#[test]
fn bad_arguments_exit_nonzero() {
    assert!(!bin(&["report"]).status.success());
    let tmp = tempfile::tempdir().unwrap();
    let o = bin(&["report", "--run-dir", p(tmp.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!tmp.path().join("report").exists());
}
