//! Prompt rendering for the five strategies.
//!
//! Every prompt is one JSON-like task block carrying the question, the
//! source query, both KG names, optionally the er2 mappings, and an
//! instruction asking for the answer inside `<sparql>` tags. Strategies
//! differ only in what is added around that block. Templates are plain text
//! with `{{name}}` placeholders and can be overridden per strategy from a
//! directory (see [`TemplateSet::load_dir`]).
//!
//! `spec_digest` is SHA-256 over the length-prefixed canonical JSON of the
//! spec followed by the template text used, hex encoded.

mod template;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use template::{TemplateError, TemplateSet, PLACEHOLDERS};

use crate::align::{Er2Doc, Er2Style};
use crate::exemplar::Exemplar;
use crate::util::sha256_hex;

pub const BASE_INSTRUCTION: &str = "Given the information above, produce a SPARQL query for KG2. In your answer please highlight the final, complete SPARQL query within the tags '<sparql>' and '</sparql>'.";

pub const FEW_SHOT_SUFFIX: &str = " Here are 4 examples:";

pub const COT_PREFIX: &str = "Before answering, explain your reasoning step by step: say how each part of the KG2 query is formed from the KG1 query and which entities and properties you choose based on the mappings.";

/// Sub-task headers of the tagged chain-of-thought scaffold, in order.
pub const THINK_STEPS: [(&str, &str); 5] = [
    ("Entity mapping", "find the key entities and relations of the question and look up their KG2 counterparts in er2."),
    ("Source analysis", "describe the structure of the KG1 query."),
    ("Property equivalents", "pick the KG2 properties that correspond to the KG1 ones, using the mappings."),
    ("Construction", "write the KG2 query so that it keeps the logical structure of the KG1 query."),
    ("Validation", "check the query against how KG2 models its data."),
];

/// Number of exemplars a few-shot prompt carries.
pub const FEW_SHOT_COUNT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    ZeroShot,
    #[serde(rename = "ZeroShotER")]
    ZeroShotEr,
    #[serde(rename = "FewShotER")]
    FewShotEr,
    CoT,
    CoTTags,
}

impl Strategy {
    pub const ALL: [Strategy; 5] =
        [Strategy::ZeroShot, Strategy::ZeroShotEr, Strategy::FewShotEr, Strategy::CoT, Strategy::CoTTags];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::ZeroShot => "ZeroShot",
            Strategy::ZeroShotEr => "ZeroShotER",
            Strategy::FewShotEr => "FewShotER",
            Strategy::CoT => "CoT",
            Strategy::CoTTags => "CoTTags",
        }
    }

    /// File stem used in template override directories.
    pub fn file_stem(self) -> &'static str {
        match self {
            Strategy::ZeroShot => "zero_shot",
            Strategy::ZeroShotEr => "zero_shot_er",
            Strategy::FewShotEr => "few_shot_er",
            Strategy::CoT => "cot",
            Strategy::CoTTags => "cot_tags",
        }
    }

    pub fn uses_er2(self) -> bool {
        self != Strategy::ZeroShot
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name().eq_ignore_ascii_case(s) || st.file_stem() == s)
            .ok_or_else(|| format!("unknown strategy {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub nlq: String,
    pub sparql_query_kg1: String,
    pub kg1_name: String,
    pub kg2_name: String,
    pub er2: Option<Er2Doc>,
    pub exemplars: Option<Vec<Exemplar>>,
    pub strategy: Strategy,
    /// Base instruction; strategy-specific text is added around it.
    pub instruction: String,
}

impl PromptSpec {
    pub fn new(
        strategy: Strategy,
        nlq: impl Into<String>,
        sparql_query_kg1: impl Into<String>,
        kg1_name: impl Into<String>,
        kg2_name: impl Into<String>,
    ) -> Self {
        PromptSpec {
            nlq: nlq.into(),
            sparql_query_kg1: sparql_query_kg1.into(),
            kg1_name: kg1_name.into(),
            kg2_name: kg2_name.into(),
            er2: None,
            exemplars: None,
            strategy,
            instruction: BASE_INSTRUCTION.to_string(),
        }
    }

    pub fn with_er2(mut self, er2: Er2Doc) -> Self {
        self.er2 = Some(er2);
        self
    }

    pub fn with_exemplars(mut self, exemplars: Vec<Exemplar>) -> Self {
        self.exemplars = Some(exemplars);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub text: String,
    pub strategy: Strategy,
    pub spec_digest: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SpecFinding {
    ErOnZeroShot,
    MissingEr2,
    ExemplarCount { found: usize },
    ExemplarsOutsideFewShot,
    SameKg,
    MissingTagInstruction,
    Empty(&'static str),
}

impl fmt::Display for SpecFinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecFinding::ErOnZeroShot => f.write_str("ZeroShot must not carry er2 (use ZeroShotER)"),
            SpecFinding::MissingEr2 => f.write_str("strategy requires er2"),
            SpecFinding::ExemplarCount { found } => {
                write!(f, "FewShotER needs exactly {FEW_SHOT_COUNT} exemplars, found {found}")
            }
            SpecFinding::ExemplarsOutsideFewShot => f.write_str("only FewShotER carries exemplars"),
            SpecFinding::SameKg => f.write_str("kg1_name and kg2_name must differ"),
            SpecFinding::MissingTagInstruction => f.write_str("instruction must mention '<sparql>' and '</sparql>'"),
            SpecFinding::Empty(field) => write!(f, "{field} is empty"),
        }
    }
}

pub fn validate_spec(spec: &PromptSpec) -> Result<(), Vec<SpecFinding>> {
    let mut out = Vec::new();
    for (name, v) in [("nlq", &spec.nlq), ("sparql_query_kg1", &spec.sparql_query_kg1)] {
        if v.trim().is_empty() {
            out.push(SpecFinding::Empty(name));
        }
    }
    if spec.kg1_name.eq_ignore_ascii_case(&spec.kg2_name) {
        out.push(SpecFinding::SameKg);
    }
    if !(spec.instruction.contains("<sparql>") && spec.instruction.contains("</sparql>")) {
        out.push(SpecFinding::MissingTagInstruction);
    }
    match (spec.strategy.uses_er2(), &spec.er2) {
        (false, Some(_)) => out.push(SpecFinding::ErOnZeroShot),
        (true, None) => out.push(SpecFinding::MissingEr2),
        _ => {}
    }
    let n = spec.exemplars.as_ref().map_or(0, Vec::len);
    if spec.strategy == Strategy::FewShotEr {
        if n != FEW_SHOT_COUNT {
            out.push(SpecFinding::ExemplarCount { found: n });
        }
    } else if n > 0 {
        out.push(SpecFinding::ExemplarsOutsideFewShot);
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

fn js(s: &str) -> String {
    serde_json::to_string(s).expect("string serializes")
}

fn think_steps() -> String {
    let mut s = String::from(
        "Work through the following steps, writing each one inside <think> and </think> tags, then give the final query:",
    );
    for (i, (head, body)) in THINK_STEPS.iter().enumerate() {
        let letter = (b'a' + i as u8) as char;
        s.push_str(&format!("\n<think>({letter}) {head}: {body}</think>"));
    }
    s
}

fn examples_block(spec: &PromptSpec) -> String {
    let Some(ex) = &spec.exemplars else { return String::new() };
    let mut out = String::new();
    for (i, e) in ex.iter().enumerate() {
        out.push_str(&format!(
            "\nExample {}:\n{{\"natural_language_question\": {},\n\"sparql_query_kg1\": {},\n\"kg1_name\": {}, \"kg2_name\": {},\n\"er2\": {}}}\n<sparql>{}</sparql>\n",
            i + 1,
            js(&e.nlq),
            js(&e.query_kg1),
            js(&spec.kg1_name),
            js(&spec.kg2_name),
            e.er2.render(Er2Style::Prompt),
            e.query_kg2,
        ));
    }
    out
}

fn instruction(spec: &PromptSpec) -> String {
    match spec.strategy {
        Strategy::FewShotEr => format!("{}{FEW_SHOT_SUFFIX}", spec.instruction),
        Strategy::CoT => format!("{COT_PREFIX} {}", spec.instruction),
        _ => spec.instruction.clone(),
    }
}

/// Placeholder values for `spec`, JSON-encoded where they sit in JSON.
fn values(spec: &PromptSpec) -> Vec<(&'static str, String)> {
    vec![
        ("nlq", js(&spec.nlq)),
        ("sparql_query_kg1", js(&spec.sparql_query_kg1)),
        ("kg1_name", js(&spec.kg1_name)),
        ("kg2_name", js(&spec.kg2_name)),
        ("er2", spec.er2.as_ref().map(|d| d.render(Er2Style::Prompt)).unwrap_or_default()),
        ("instruction", js(&instruction(spec))),
        ("examples", examples_block(spec)),
        ("think_steps", think_steps()),
    ]
}

/// Renders with the built-in templates. Panics if `validate_spec` fails;
/// call it first on untrusted input.
pub fn render_prompt(spec: &PromptSpec) -> RenderedPrompt {
    render_prompt_with(spec, &TemplateSet::builtin())
}

pub fn render_prompt_with(spec: &PromptSpec, templates: &TemplateSet) -> RenderedPrompt {
    if let Err(f) = validate_spec(spec) {
        let msgs: Vec<String> = f.iter().map(ToString::to_string).collect();
        panic!("render_prompt on invalid spec: {}", msgs.join("; "));
    }
    let tpl = templates.get(spec.strategy);
    let text = template::fill(tpl, &values(spec));
    RenderedPrompt { text, strategy: spec.strategy, spec_digest: spec_digest(spec, tpl) }
}

pub fn spec_digest(spec: &PromptSpec, template: &str) -> String {
    let canon = serde_json::to_string(spec).expect("spec serializes");
    sha256_hex(&[canon.as_bytes(), template.as_bytes()])
}

#[cfg(test)]
mod tests;
