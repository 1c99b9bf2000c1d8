//! Embedding providers.
//!
//! Precomputed vector files are whitespace separated text:
//!
//! ```text
//! 3 2          # dimension, count
//! q12 0.1 0.2 -0.7
//! q40 0.0 1.5 0.25
//! ```

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::ExemplarError;

#[derive(Debug, Clone, Copy)]
pub struct EmbedInput<'a> {
    pub id: &'a str,
    pub text: &'a str,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
    pub source_text: String,
}

pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;
    /// One vector per input, same order.
    fn embed(&self, inputs: &[EmbedInput<'_>]) -> Result<Vec<Vec<f64>>, ExemplarError>;
}

/// Embeds `inputs` and checks the result: one finite vector per input,
/// all of one dimension.
pub fn embed_texts(
    inputs: &[EmbedInput<'_>],
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<EmbeddingVector>, ExemplarError> {
    if inputs.is_empty() {
        return Err(ExemplarError::EmptyInput);
    }
    let raw = provider.embed(inputs)?;
    if raw.len() != inputs.len() {
        return Err(ExemplarError::Provider(format!(
            "{} returned {} vectors for {} texts",
            provider.name(),
            raw.len(),
            inputs.len()
        )));
    }
    let dim = raw[0].len();
    let mut out = Vec::with_capacity(raw.len());
    for (v, inp) in raw.into_iter().zip(inputs) {
        if v.len() != dim {
            return Err(ExemplarError::DimensionMismatch { id: inp.id.into(), expected: dim, found: v.len() });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(ExemplarError::NonFinite { id: inp.id.into() });
        }
        out.push(EmbeddingVector { values: v, source_text: inp.text.to_string() });
    }
    Ok(out)
}

/// Vectors loaded from a file, looked up by id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PrecomputedEmbeddings {
    pub dim: usize,
    pub vectors: BTreeMap<String, Vec<f64>>,
}

impl PrecomputedEmbeddings {
    pub fn parse(text: &str) -> Result<Self, ExemplarError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let perr = |line: usize, message: String| ExemplarError::Parse { line, message };
        let (hl, header) = lines.next().ok_or_else(|| perr(1, "missing header".into()))?;
        let nums: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| perr(hl, format!("bad header value {t:?}"))))
            .collect::<Result<_, _>>()?;
        let [dim, count] = nums[..] else {
            return Err(perr(hl, "header must be `<dimension> <count>`".into()));
        };
        let mut vectors = BTreeMap::new();
        for (ln, l) in lines {
            let mut parts = l.split_whitespace();
            let id = parts.next().expect("non-empty line").to_string();
            let v: Vec<f64> = parts
                .map(|t| t.parse::<f64>().map_err(|_| perr(ln, format!("bad number {t:?}"))))
                .collect::<Result<_, _>>()?;
            if v.len() != dim {
                return Err(ExemplarError::DimensionMismatch { id, expected: dim, found: v.len() });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(ExemplarError::NonFinite { id });
            }
            if vectors.insert(id.clone(), v).is_some() {
                return Err(perr(ln, format!("duplicate id {id:?}")));
            }
        }
        if vectors.len() != count {
            return Err(perr(hl, format!("header says {count} vectors, found {}", vectors.len())));
        }
        Ok(PrecomputedEmbeddings { dim, vectors })
    }

    pub fn load(path: &Path) -> Result<Self, ExemplarError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.dim, self.vectors.len());
        for (id, v) in &self.vectors {
            s.push_str(id);
            for x in v {
                s.push_str(&format!(" {x}"));
            }
            s.push('\n');
        }
        s
    }
}

impl EmbeddingProvider for PrecomputedEmbeddings {
    fn name(&self) -> &str {
        "precomputed"
    }

    fn embed(&self, inputs: &[EmbedInput<'_>]) -> Result<Vec<Vec<f64>>, ExemplarError> {
        inputs
            .iter()
            .map(|i| self.vectors.get(i.id).cloned().ok_or_else(|| ExemplarError::MissingVector(i.id.into())))
            .collect()
    }
}

/// Offline bag-of-words embedder: lowercase word unigrams and bigrams
/// hashed into `dim` buckets, L2-normalized.
#[derive(Debug, Clone)]
pub struct HashingEmbedder {
    pub dim: usize,
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        HashingEmbedder { dim: 256 }
    }
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf29ce484222325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100000001b3))
}

impl HashingEmbedder {
    pub fn embed_one(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim.max(1)];
        let words: Vec<String> = text
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .map(str::to_lowercase)
            .collect();
        let mut bump = |feat: &str| {
            let h = fnv1a(feat);
            let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
            v[(h % self.dim.max(1) as u64) as usize] += sign;
        };
        for w in &words {
            bump(w);
        }
        for pair in words.windows(2) {
            bump(&format!("{} {}", pair[0], pair[1]));
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            v.iter_mut().for_each(|x| *x /= n);
        }
        v
    }
}

impl EmbeddingProvider for HashingEmbedder {
    fn name(&self) -> &str {
        "hashing"
    }

    fn embed(&self, inputs: &[EmbedInput<'_>]) -> Result<Vec<Vec<f64>>, ExemplarError> {
        Ok(inputs.iter().map(|i| self.embed_one(i.text)).collect())
    }
}

/// Remote embedder speaking the common `/embeddings` JSON schema
/// (`{"model", "input": [...]}` → `{"data": [{"embedding": [...]}]}`).
pub struct HttpEmbedder {
    pub base_url: String,
    pub model: String,
    pub api_key: Option<String>,
    agent: ureq::Agent,
}

impl HttpEmbedder {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>, api_key: Option<String>) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(Duration::from_secs(60)).build();
        HttpEmbedder { base_url: base_url.into(), model: model.into(), api_key, agent }
    }

    /// From `EMBEDDING_API_BASE` (falling back to `LLM_API_BASE`) and
    /// `LLM_API_KEY`.
    pub fn from_env(model: impl Into<String>) -> Option<Self> {
        let base = std::env::var("EMBEDDING_API_BASE").or_else(|_| std::env::var("LLM_API_BASE")).ok()?;
        Some(Self::new(base, model, std::env::var("LLM_API_KEY").ok()))
    }
}

impl EmbeddingProvider for HttpEmbedder {
    fn name(&self) -> &str {
        &self.model
    }

    fn embed(&self, inputs: &[EmbedInput<'_>]) -> Result<Vec<Vec<f64>>, ExemplarError> {
        let url = format!("{}/embeddings", self.base_url.trim_end_matches('/'));
        let mut req = self.agent.post(&url);
        if let Some(k) = &self.api_key {
            req = req.set("Authorization", &format!("Bearer {k}"));
        }
        let texts: Vec<&str> = inputs.iter().map(|i| i.text).collect();
        let body: Value = req
            .send_json(json!({"model": self.model, "input": texts}))
            .map_err(|e| ExemplarError::Provider(e.to_string()))?
            .into_json()
            .map_err(|e| ExemplarError::Provider(e.to_string()))?;
        let data = body["data"].as_array().ok_or_else(|| ExemplarError::Provider("response lacks data".into()))?;
        let mut rows: Vec<(usize, Vec<f64>)> = data
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let idx = d["index"].as_u64().map_or(i, |x| x as usize);
                let v = d["embedding"]
                    .as_array()
                    .map(|a| a.iter().filter_map(Value::as_f64).collect())
                    .unwrap_or_default();
                (idx, v)
            })
            .collect();
        rows.sort_by_key(|(i, _)| *i);
        Ok(rows.into_iter().map(|(_, v)| v).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_texts_identical_vectors() {
        let h = HashingEmbedder::default();
        let inp = [EmbedInput { id: "a", text: "Who directed Alien?" }, EmbedInput { id: "b", text: "Who directed Alien?" }];
        let v = embed_texts(&inp, &h).unwrap();
        assert_eq!(v[0], EmbeddingVector { values: v[1].values.clone(), source_text: "Who directed Alien?".into() });
        assert!(matches!(embed_texts(&[], &h), Err(ExemplarError::EmptyInput)));
    }

    #[test]
    fn precomputed_file_round_trip_and_mismatch() {
        let text = "3 3\nq1 0.1 0.2 0.3\nq2 1 2 3\nq3 -1 0 1e-3\n";
        let p = PrecomputedEmbeddings::parse(text).unwrap();
        let inp: Vec<EmbedInput> = ["q1", "q2", "q3"].iter().map(|id| EmbedInput { id, text: "" }).collect();
        let v = embed_texts(&inp, &p).unwrap();
        assert_eq!(v[2].values, vec![-1.0, 0.0, 0.001]);
        assert_eq!(PrecomputedEmbeddings::parse(&p.to_text()).unwrap(), p);
        let bad = "384 2\nq1 ".to_string() + &vec!["0.1"; 384].join(" ") + "\nq2 " + &vec!["0.1"; 768].join(" ");
        assert!(matches!(
            PrecomputedEmbeddings::parse(&bad),
            Err(ExemplarError::DimensionMismatch { expected: 384, found: 768, .. })
        ));
    }
}
