use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{ChatRequest, ChatResponse};
use crate::prompt::Strategy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CassetteMode {
    Record,
    Replay,
    Passthrough,
}

impl FromStr for CassetteMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "record" => Ok(CassetteMode::Record),
            "replay" => Ok(CassetteMode::Replay),
            "passthrough" => Ok(CassetteMode::Passthrough),
            _ => Err(format!("unknown cassette mode {s:?}")),
        }
    }
}

/// What was asked, kept for human review of cassette files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestSnapshot {
    pub model_id: String,
    pub spec_digest: String,
    pub strategy: Strategy,
    pub temperature: f64,
    pub max_tokens: u32,
    pub prompt_text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub digest: String,
    pub request: RequestSnapshot,
    pub response: ChatResponse,
}

#[derive(Debug, Default)]
struct Inner {
    entries: BTreeMap<String, ChatResponse>,
}

/// Digest-keyed store of exchanges. Clones made with [`Cassette::with_mode`]
/// share entries and file.
#[derive(Debug, Clone)]
pub struct Cassette {
    mode: CassetteMode,
    path: Option<PathBuf>,
    inner: Arc<Mutex<Inner>>,
}

impl Cassette {
    pub fn in_memory(mode: CassetteMode) -> Self {
        Cassette { mode, path: None, inner: Arc::default() }
    }

    /// Loads `path` if it exists. Record mode appends new exchanges to it.
    pub fn open(path: impl AsRef<Path>, mode: CassetteMode) -> std::io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut inner = Inner::default();
        match File::open(&path) {
            Ok(f) => {
                for (i, line) in BufReader::new(f).lines().enumerate() {
                    let line = line?;
                    if line.trim().is_empty() {
                        continue;
                    }
                    let e: CassetteEntry = serde_json::from_str(&line).map_err(|err| {
                        std::io::Error::new(
                            std::io::ErrorKind::InvalidData,
                            format!("{}:{}: {err}", path.display(), i + 1),
                        )
                    })?;
                    inner.entries.insert(e.digest, e.response);
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound && mode != CassetteMode::Replay => {}
            Err(e) => return Err(e),
        }
        Ok(Cassette { mode, path: Some(path), inner: Arc::new(Mutex::new(inner)) })
    }

    pub fn with_mode(&self, mode: CassetteMode) -> Self {
        Cassette { mode, ..self.clone() }
    }

    pub fn mode(&self) -> CassetteMode {
        self.mode
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, digest: &str) -> Option<ChatResponse> {
        self.inner.lock().expect("cassette lock").entries.get(digest).cloned()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("cassette lock").entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn digests(&self) -> Vec<String> {
        self.inner.lock().expect("cassette lock").entries.keys().cloned().collect()
    }

    /// Stores one exchange; writes are serialized through the lock.
    pub fn store(&self, req: &ChatRequest, resp: &ChatResponse) -> std::io::Result<()> {
        let mut g = self.inner.lock().expect("cassette lock");
        if let Some(path) = &self.path {
            let entry = CassetteEntry {
                digest: req.request_digest.clone(),
                request: RequestSnapshot {
                    model_id: req.model_id.clone(),
                    spec_digest: req.prompt.spec_digest.clone(),
                    strategy: req.prompt.strategy,
                    temperature: req.temperature,
                    max_tokens: req.max_tokens,
                    prompt_text: req.prompt.text.clone(),
                },
                response: resp.clone(),
            };
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            let mut f = OpenOptions::new().create(true).append(true).open(path)?;
            writeln!(f, "{}", serde_json::to_string(&entry).expect("entry serializes"))?;
        }
        g.entries.insert(req.request_digest.clone(), resp.clone());
        Ok(())
    }
}
