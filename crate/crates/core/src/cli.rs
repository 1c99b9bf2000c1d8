//! Command-line front end. The binary only calls [`main`].

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use crate::align::{build_er2, coverage_stats, source_terms, Aligner, MappingCache};
use crate::bench::{
    attach_categories, build_benchmark, ingest_source, merge_sources, BuildOptions, CategoryDistribution,
    DatasetManifest, IngestOptions, SourceFormat,
};
use crate::eval::SparqlClient;
use crate::exemplar::{Metric, Selection};
use crate::pipeline::{
    apply_annotations, ExemplarConfig, load_records, rescreen, run_pipeline, write_jsonl, RunConfig, RunRecord,
};
use crate::profile::{load_profiles, ProfileRegistry};
use crate::prompt::{render_prompt_with, validate_spec, PromptSpec, Strategy, TemplateSet};
use crate::report::{accuracy_table, emit_outputs, error_report, Format};

type CliResult = Result<ExitCode, Box<dyn std::error::Error>>;

#[derive(Debug, Parser)]
#[command(name = "sparql-bridge", version, about = "LLM-based SPARQL translation between knowledge graphs")]
pub struct Cli {
    /// KG profile overrides (TOML).
    #[arg(long, global = true)]
    profiles: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Benchmark construction.
    #[command(subcommand)]
    Bench(BenchCmd),
    /// Cross-KG term alignment.
    #[command(subcommand)]
    Align(AlignCmd),
    /// Few-shot exemplar selection.
    #[command(subcommand)]
    Exemplars(ExemplarsCmd),
    /// Prompt rendering.
    #[command(subcommand)]
    Prompt(PromptCmd),
    /// Run the model x strategy x direction matrix over a manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Re-screen failed runs and merge the manual annotation sidecar.
    Classify {
        #[arg(long)]
        config: PathBuf,
    },
    /// Accuracy and error tables from a run directory.
    Report(ReportArgs),
}

#[derive(Debug, Subcommand)]
enum BenchCmd {
    /// Filter and sample a benchmark manifest from raw sources.
    Build(BenchBuildArgs),
}

#[derive(Debug, Args)]
struct BenchBuildArgs {
    /// `KG=FORMAT:PATH`, FORMAT one of qald, dblp_quad. Repeat per KG.
    #[arg(long = "source", required = true)]
    sources: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "benchmark")]
    name: String,
    #[arg(long, default_value = "train")]
    split: String,
    #[arg(long, default_value = "")]
    note: String,
    /// Tab-separated `id<TAB>category` file.
    #[arg(long)]
    categories: Option<PathBuf>,
    /// Template ids to drop, one per line.
    #[arg(long)]
    exclude_templates: Option<PathBuf>,
    /// Ids to keep ahead of sampling, one per line.
    #[arg(long)]
    include: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    parallelism: usize,
    #[arg(long, default_value_t = 60)]
    timeout_secs: u64,
    /// Also write per-item filter verdicts here (JSONL).
    #[arg(long)]
    verdicts: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum AlignCmd {
    /// Build er2 mappings for every item of a manifest, or for one query.
    Extract(AlignArgs),
}

#[derive(Debug, Args)]
struct AlignArgs {
    /// e.g. `DBpedia->Wikidata`.
    #[arg(long)]
    direction: String,
    #[arg(long)]
    cache: PathBuf,
    #[arg(long, conflicts_with = "query")]
    manifest: Option<PathBuf>,
    /// Single source query; prints its er2 document.
    #[arg(long)]
    query: Option<String>,
    /// Where to write the updated manifest (default: in place).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Use only the cache; uncached terms are an error.
    #[arg(long)]
    offline: bool,
    #[arg(long, default_value_t = 60)]
    timeout_secs: u64,
}

#[derive(Debug, Subcommand)]
enum ExemplarsCmd {
    /// Cluster the pool and write the chosen few-shot exemplars.
    Select(ExemplarArgs),
}

#[derive(Debug, Args)]
struct ExemplarArgs {
    #[arg(long)]
    pool: PathBuf,
    /// Manifest whose ids must never be chosen.
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    direction: String,
    #[arg(long, default_value_t = crate::prompt::FEW_SHOT_COUNT)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Precomputed vectors (`<dim> <count>` header, then `id v1 v2 ...`);
    /// hashing embedder otherwise.
    #[arg(long)]
    vectors: Option<PathBuf>,
    #[arg(long, default_value = "euclidean")]
    metric: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Subcommand)]
enum PromptCmd {
    /// Print the prompt for one item and strategy.
    Render(PromptArgs),
}

#[derive(Debug, Args)]
struct PromptArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    item: String,
    #[arg(long)]
    strategy: String,
    #[arg(long)]
    direction: String,
    /// Selection written by `exemplars select`, for FewShotER.
    #[arg(long)]
    exemplars: Option<PathBuf>,
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Print the spec digest on stderr.
    #[arg(long)]
    digest: bool,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Directory holding records.jsonl and annotations.jsonl.
    #[arg(long)]
    run_dir: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "text,csv,svg")]
    formats: Vec<String>,
}

pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

pub fn dispatch(cli: Cli) -> CliResult {
    let reg = || load_profiles(cli.profiles.as_deref());
    match cli.command {
        Command::Bench(BenchCmd::Build(a)) => bench_build(a, &reg()?),
        Command::Align(AlignCmd::Extract(a)) => align_extract(a, &reg()?),
        Command::Exemplars(ExemplarsCmd::Select(a)) => exemplars_select(a, &reg()?),
        Command::Prompt(PromptCmd::Render(a)) => prompt_render(a, &reg()?),
        Command::Run { config } => run(&config),
        Command::Classify { config } => classify(&config),
        Command::Report(a) => report(a),
    }
}

fn read(path: &Path) -> Result<String, Box<dyn std::error::Error>> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn bench_build(a: BenchBuildArgs, reg: &ProfileRegistry) -> CliResult {
    let opts = IngestOptions {
        excluded_templates: match &a.exclude_templates {
            Some(p) => IngestOptions::parse_exclusions(&read(p)?),
            None => BTreeSet::new(),
        },
    };
    let mut reports = Vec::new();
    let mut kgs = Vec::new();
    for s in &a.sources {
        let (kg, rest) = s.split_once('=').ok_or_else(|| format!("--source {s:?}: expected KG=FORMAT:PATH"))?;
        let (fmt, path) = rest.split_once(':').ok_or_else(|| format!("--source {s:?}: expected KG=FORMAT:PATH"))?;
        let profile = reg.require(kg)?;
        let format: SourceFormat = fmt.parse()?;
        let r = ingest_source(Path::new(path), format, &profile.name, &opts)?;
        eprintln!(
            "{}: {} questions, {} English, {} non-English skipped, {} excluded by template",
            profile.name, r.counts.questions, r.counts.english, r.counts.skipped_non_english, r.counts.excluded_templates
        );
        reports.push(r);
        kgs.push(profile.clone());
    }
    let merged = merge_sources(reports);
    let include = match &a.include {
        Some(p) => read(p)?.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect(),
        None => Vec::new(),
    };
    let build = BuildOptions {
        name: a.name,
        source_split: a.split,
        snapshot_note: a.note,
        target_n: a.n,
        seed: a.seed,
        parallelism: a.parallelism,
        include,
    };
    let client = SparqlClient::new(Duration::from_secs(a.timeout_secs));
    let (mut manifest, verdicts) = build_benchmark(&merged.items, &kgs, &client, &build)?;
    if let Some(p) = &a.verdicts {
        write_jsonl(p, &verdicts)?;
    }
    if let Some(p) = &a.categories {
        manifest = attach_categories(manifest, &read(p)?)?;
        eprint!("{}", CategoryDistribution::of(&manifest));
    }
    manifest.save(&a.out)?;
    let passed = verdicts.iter().filter(|v| v.passed).count();
    println!("{} of {} items passed filtering; wrote {} to {}", passed, verdicts.len(), manifest.count, a.out.display());
    Ok(ExitCode::SUCCESS)
}

fn align_extract(a: AlignArgs, reg: &ProfileRegistry) -> CliResult {
    let d = reg.direction(&a.direction)?;
    let cache = MappingCache::open(&a.cache)?;
    let client = SparqlClient::new(Duration::from_secs(a.timeout_secs));
    let aligner = if a.offline { Aligner::offline(&cache) } else { Aligner::new(&cache, &client) };
    if let Some(q) = &a.query {
        let er2 = build_er2(&source_terms(q, &d.source)?, &d, &aligner)?;
        println!("{}", serde_json::to_string_pretty(&er2)?);
        return Ok(ExitCode::SUCCESS);
    }
    let path = a.manifest.ok_or("one of --manifest or --query is required")?;
    let mut manifest = DatasetManifest::load(&path)?;
    for item in &mut manifest.items {
        let Some(q) = item.query_by_kg.get(&d.source.name) else { continue };
        let er2 = build_er2(&source_terms(q, &d.source)?, &d, &aligner)?;
        item.er2_by_direction.insert(d.key(), er2);
    }
    let stats = coverage_stats(manifest.items.iter().filter_map(|i| i.query_by_kg.get(&d.source.name)).map(String::as_str), &d, &cache);
    manifest.save(a.out.as_deref().unwrap_or(&path))?;
    println!("{}", serde_json::to_string_pretty(&stats)?);
    Ok(ExitCode::SUCCESS)
}

fn exemplars_select(a: ExemplarArgs, reg: &ProfileRegistry) -> CliResult {
    let d = reg.direction(&a.direction)?;
    let pool = DatasetManifest::load(&a.pool)?;
    let test = DatasetManifest::load(&a.test)?;
    let test_ids: BTreeSet<String> = test.items.iter().map(|i| i.id.clone()).collect();
    let metric: Metric = serde_json::from_value(serde_json::Value::String(a.metric.clone()))
        .map_err(|_| format!("unknown metric {:?} (euclidean, cosine)", a.metric))?;
    let cfg = ExemplarConfig { pool: a.pool.clone(), vectors: a.vectors, k: a.k, metric };
    let sel = crate::pipeline::select_for_direction(&pool, &d, &cfg, &test_ids, a.seed)?;
    crate::util::write_atomic(&a.out, serde_json::to_string_pretty(&sel)?.as_bytes())?;
    for e in &sel.exemplars {
        println!("{}\t{}", e.id, e.nlq);
    }
    Ok(ExitCode::SUCCESS)
}

fn prompt_render(a: PromptArgs, reg: &ProfileRegistry) -> CliResult {
    let d = reg.direction(&a.direction)?;
    let strategy: Strategy = a.strategy.parse()?;
    let manifest = DatasetManifest::load(&a.manifest)?;
    let item = manifest.get(&a.item).ok_or_else(|| format!("no item {:?} in manifest", a.item))?;
    let q1 = item.query_by_kg.get(&d.source.name).ok_or_else(|| format!("item has no {} query", d.source.name))?;
    let mut spec = PromptSpec::new(strategy, &item.nlq, q1.clone(), &d.source.name, &d.target.name);
    if strategy.uses_er2() {
        let er2 = item.er2_by_direction.get(&d.key()).cloned().ok_or("item has no er2 for this direction; run `align extract`")?;
        spec = spec.with_er2(er2);
    }
    if strategy == Strategy::FewShotEr {
        let p = a.exemplars.as_deref().ok_or("FewShotER needs --exemplars")?;
        let sel: Selection = serde_json::from_str(&read(p)?)?;
        spec = spec.with_exemplars(sel.exemplars);
    }
    validate_spec(&spec).map_err(|f| format!("invalid prompt spec: {f:?}"))?;
    let templates = match &a.templates {
        Some(dir) => TemplateSet::load_dir(dir)?,
        None => TemplateSet::builtin(),
    };
    let r = render_prompt_with(&spec, &templates);
    print!("{}", r.text);
    if !r.text.ends_with('\n') {
        println!();
    }
    if a.digest {
        eprintln!("spec digest: {}", r.spec_digest);
    }
    Ok(ExitCode::SUCCESS)
}

fn run(config: &Path) -> CliResult {
    let cfg = RunConfig::load(config)?;
    let result = run_pipeline(&cfg)?;
    let s = &result.summary;
    println!(
        "{} cells, {} newly completed, {} unfinished; record digest {}",
        s.cells, s.new_completions, s.unfinished, s.record_digest
    );
    Ok(if s.unfinished == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn classify(config: &Path) -> CliResult {
    let cfg = RunConfig::load(config)?;
    let reg = cfg.registry()?;
    let directions = cfg.resolve_directions(&reg)?;
    let manifest = DatasetManifest::load(&cfg.manifest)?;
    let path = cfg.output_dir.join("records.jsonl");
    let mut records: Vec<RunRecord> = load_records(&path)?.into_values().collect();
    if records.is_empty() {
        return Err(format!("no records in {}", path.display()).into());
    }
    rescreen(&mut records, &manifest, &directions);
    let annotations = apply_annotations(&mut records, cfg.annotations.as_deref())?;
    write_jsonl(&path, &records)?;
    write_jsonl(&cfg.output_dir.join("annotations.jsonl"), &annotations)?;
    let mut by_source: BTreeMap<String, usize> = BTreeMap::new();
    for a in &annotations {
        *by_source.entry(format!("{:?}", a.source).to_lowercase()).or_default() += 1;
    }
    println!("{} annotations {:?}", annotations.len(), by_source);
    Ok(ExitCode::SUCCESS)
}

fn report(a: ReportArgs) -> CliResult {
    let rec_path = a.run_dir.join("records.jsonl");
    if !rec_path.is_file() {
        return Err(format!("no records at {}", rec_path.display()).into());
    }
    let records: Vec<RunRecord> = load_records(&rec_path)?.into_values().collect();
    let ann_path = a.run_dir.join("annotations.jsonl");
    let mut annotations = Vec::new();
    if ann_path.exists() {
        for (i, line) in read(&ann_path)?.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            annotations.push(serde_json::from_str(line).map_err(|e| format!("{}:{}: {e}", ann_path.display(), i + 1))?);
        }
    }
    let formats: BTreeSet<Format> = a.formats.iter().map(|f| f.parse()).collect::<Result<_, _>>()?;
    let acc = accuracy_table(&records);
    let err = error_report(&annotations, &records);
    let out = a.out.unwrap_or_else(|| a.run_dir.join("report"));
    let written = emit_outputs(&acc, &err, &formats, &out)?;
    if formats.contains(&Format::Text) {
        print!("{}\n{}", acc.to_text(), err.to_text());
    }
    for p in written {
        eprintln!("wrote {}", p.display());
    }
    Ok(ExitCode::SUCCESS)
}
