use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::Strategy;

pub const PLACEHOLDERS: [&str; 8] =
    ["nlq", "sparql_query_kg1", "kg1_name", "kg2_name", "er2", "instruction", "examples", "think_steps"];

const HEAD: &str = "{\"natural_language_question\": {{nlq}},\n\"sparql_query_kg1\": {{sparql_query_kg1}},\n\"kg1_name\": {{kg1_name}}, \"kg2_name\": {{kg2_name}},\n";
const ER2_LINE: &str = "\"er2\": {{er2}},\n";
const TAIL: &str = "\"instruction\": {{instruction}}}";

#[derive(Debug, thiserror::Error)]
pub enum TemplateError {
    #[error("cannot read template {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("template {path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

/// One template per strategy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateSet {
    templates: BTreeMap<Strategy, String>,
}

impl TemplateSet {
    pub fn builtin() -> Self {
        let mut templates = BTreeMap::new();
        for s in Strategy::ALL {
            let er2 = if s.uses_er2() { ER2_LINE } else { "" };
            let extra = match s {
                Strategy::FewShotEr => "\n{{examples}}",
                Strategy::CoTTags => "\n{{think_steps}}",
                _ => "",
            };
            templates.insert(s, format!("{HEAD}{er2}{TAIL}{extra}"));
        }
        TemplateSet { templates }
    }

    /// Built-ins, with any `<stem>.txt` in `dir` replacing the template for
    /// that strategy (stems: `zero_shot`, `zero_shot_er`, `few_shot_er`,
    /// `cot`, `cot_tags`).
    pub fn load_dir(dir: &Path) -> Result<Self, TemplateError> {
        let mut set = TemplateSet::builtin();
        for s in Strategy::ALL {
            let path = dir.join(format!("{}.txt", s.file_stem()));
            if !path.exists() {
                continue;
            }
            let text = std::fs::read_to_string(&path)
                .map_err(|source| TemplateError::Io { path: path.clone(), source })?;
            check(s, &text).map_err(|message| TemplateError::Invalid { path: path.clone(), message })?;
            set.templates.insert(s, text);
        }
        Ok(set)
    }

    pub fn get(&self, s: Strategy) -> &str {
        &self.templates[&s]
    }
}

fn placeholders(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(i) = rest.find("{{") {
        let after = &rest[i + 2..];
        match after.find("}}") {
            Some(j) => {
                out.push(&after[..j]);
                rest = &after[j + 2..];
            }
            None => break,
        }
    }
    out
}

fn check(s: Strategy, text: &str) -> Result<(), String> {
    let names = placeholders(text);
    if let Some(bad) = names.iter().find(|n| !PLACEHOLDERS.contains(n)) {
        return Err(format!("unknown placeholder {{{{{bad}}}}}"));
    }
    let has = |n: &str| names.contains(&n);
    if !has("instruction") {
        return Err("missing {{instruction}}".into());
    }
    if s.uses_er2() != has("er2") {
        return Err(format!("{s} templates {} {{{{er2}}}}", if s.uses_er2() { "need" } else { "must not use" }));
    }
    if s == Strategy::FewShotEr && !has("examples") {
        return Err("missing {{examples}}".into());
    }
    Ok(())
}

/// Substitutes placeholders in one pass; substituted text is not rescanned.
pub(super) fn fill(template: &str, values: &[(&str, String)]) -> String {
    let mut out = String::with_capacity(template.len() * 2);
    let mut rest = template;
    while let Some(i) = rest.find("{{") {
        out.push_str(&rest[..i]);
        let after = &rest[i + 2..];
        let hit = after
            .find("}}")
            .and_then(|j| values.iter().find(|(k, _)| *k == &after[..j]).map(|(_, v)| (j, v)));
        match hit {
            Some((j, v)) => {
                out.push_str(v);
                rest = &after[j + 2..];
            }
            None => {
                out.push_str("{{");
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}
