use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::exemplar::Metric;
use crate::llm::{CassetteMode, RetryPolicy, DEFAULT_MAX_TOKENS};
use crate::profile::{load_profiles, ConfigError, ProfileRegistry, TranslationDirection};
use crate::prompt::{Strategy, FEW_SHOT_COUNT};

/// Declarative run description, read from TOML:
///
/// ```toml
/// seed = 42
/// manifest = "manifest.json"
/// output_dir = "runs/demo"
/// models = ["mistral-large"]
/// strategies = ["ZeroShotER", "FewShotER"]
/// directions = ["DBpedia->Wikidata"]
/// concurrency = 4
///
/// [cassette]
/// path = "cassette.jsonl"
/// mode = "replay"
///
/// [endpoints]          # KG name -> SPARQL endpoint, beats profile and env
/// Wikidata = "http://127.0.0.1:7878/sparql"
///
/// [exemplars]          # needed when FewShotER is configured
/// pool = "pool.json"
/// vectors = "pool.vec" # optional; hashing embedder otherwise
/// ```
///
/// Relative paths resolve against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Source of all randomness in the run.
    pub seed: u64,
    pub manifest: PathBuf,
    pub output_dir: PathBuf,
    pub models: Vec<String>,
    pub strategies: Vec<Strategy>,
    pub directions: Vec<String>,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
    #[serde(default)]
    pub profiles: Option<PathBuf>,
    #[serde(default)]
    pub templates: Option<PathBuf>,
    #[serde(default)]
    pub endpoints: BTreeMap<String, String>,
    pub cassette: CassetteConfig,
    #[serde(default)]
    pub llm: LlmParams,
    #[serde(default)]
    pub exemplars: Option<ExemplarConfig>,
    #[serde(default)]
    pub eval: EvalConfig,
    /// JSONL of `{run_id, query_text}` replacing extraction for listed runs.
    #[serde(default)]
    pub overrides: Option<PathBuf>,
    /// Manual annotation sidecar merged over heuristic labels.
    #[serde(default)]
    pub annotations: Option<PathBuf>,
}

fn default_concurrency() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CassetteConfig {
    pub path: PathBuf,
    pub mode: CassetteMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmParams {
    pub temperature: f64,
    pub max_tokens: u32,
    pub system: Option<String>,
    pub retry: RetryPolicy,
}

impl Default for LlmParams {
    fn default() -> Self {
        LlmParams { temperature: 0.0, max_tokens: DEFAULT_MAX_TOKENS, system: None, retry: RetryPolicy::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExemplarConfig {
    /// Manifest whose items form the exemplar pool.
    pub pool: PathBuf,
    #[serde(default)]
    pub vectors: Option<PathBuf>,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub metric: Metric,
}

fn default_k() -> usize {
    FEW_SHOT_COUNT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub timeout_secs: u64,
    /// Compare rows as sets instead of multisets.
    pub set_semantics: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { timeout_secs: 60, set_semantics: false }
    }
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::new("run config", e.to_string()))?;
        cfg.resolve_paths(base_dir);
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::new(path.display().to_string(), e.to_string()))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.manifest);
        fix(&mut self.output_dir);
        fix(&mut self.cassette.path);
        for p in [&mut self.profiles, &mut self.templates, &mut self.overrides, &mut self.annotations].into_iter().flatten() {
            fix(p);
        }
        if let Some(ex) = &mut self.exemplars {
            fix(&mut ex.pool);
            if let Some(v) = &mut ex.vectors {
                fix(v);
            }
        }
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        let nonempty = |name: &str, n: usize| {
            if n == 0 {
                Err(ConfigError::new(name, "must list at least one entry"))
            } else {
                Ok(())
            }
        };
        nonempty("models", self.models.len())?;
        nonempty("strategies", self.strategies.len())?;
        nonempty("directions", self.directions.len())?;
        if self.concurrency == 0 {
            return Err(ConfigError::new("concurrency", "must be at least 1"));
        }
        if self.strategies.contains(&Strategy::FewShotEr) && self.exemplars.is_none() {
            return Err(ConfigError::new("exemplars", "FewShotER needs an [exemplars] pool"));
        }
        Ok(())
    }

    /// Profiles with endpoint overrides applied (config beats environment).
    pub fn registry(&self) -> Result<ProfileRegistry, ConfigError> {
        let mut reg = load_profiles(self.profiles.as_deref())?;
        for (kg, url) in &self.endpoints {
            let mut p = reg.require(kg).map_err(|e| ConfigError::new(format!("endpoints.{kg}"), e.message))?.clone();
            p.endpoint_url = url.clone();
            reg.register(p);
        }
        Ok(reg)
    }

    pub fn resolve_directions(&self, reg: &ProfileRegistry) -> Result<Vec<TranslationDirection>, ConfigError> {
        self.directions
            .iter()
            .enumerate()
            .map(|(i, d)| reg.direction(d).map_err(|e| ConfigError::new(format!("directions[{i}]"), e.message)))
            .collect()
    }
}
