//! Run configuration, config hashing and on-disk artifact helpers.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use proofsynth::corpus::{Corpus, Split, SplitSpec, Subset};
use proofsynth::dataset::LengthConfig;
use proofsynth::generator::Temperature;

pub const CORPUS_FILE: &str = "corpus.json";
pub const SPLIT_FILE: &str = "split.json";
pub const RUNS_DIR: &str = "runs";
pub const EXAMPLES_DIR: &str = "examples";

/// A flag combination that can be rejected before any work starts.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

macro_rules! usage {
    ($($arg:tt)*) => {
        return Err(anyhow::Error::new($crate::config::UsageError(format!($($arg)*))))
    };
}
pub(crate) use usage;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Generate,
    #[value(name = "generate+context")]
    #[serde(rename = "generate+context")]
    GenerateContext,
    #[value(name = "generate+repair")]
    #[serde(rename = "generate+repair")]
    GenerateRepair,
    IteratedRepair,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Generate => "generate",
            Mode::GenerateContext => "generate+context",
            Mode::GenerateRepair => "generate+repair",
            Mode::IteratedRepair => "iterated-repair",
        }
    }
}

#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case")]
pub enum GeneratorConfig {
    Mock { recall: f64, fuzzy: f64, mutation_rate: f64, seed: u64 },
    Remote { url: String, repair_url: String, timeout_ms: u64 },
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "snake_case")]
pub enum CheckerConfig {
    Embedded { step_timeout_ms: u64, proof_timeout_ms: Option<u64> },
    Remote { addr: String, step_timeout_ms: u64 },
}

impl CheckerConfig {
    pub fn step_timeout_ms(&self) -> u64 {
        match self {
            CheckerConfig::Embedded { step_timeout_ms, .. } | CheckerConfig::Remote { step_timeout_ms, .. } => {
                *step_timeout_ms
            }
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Sampling {
    pub n_samples: u32,
    pub temperatures: Vec<Temperature>,
    pub top_k: u32,
    pub max_new_tokens: u32,
    pub seed: u64,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Lengths {
    pub generate: LengthConfig,
    pub repair: LengthConfig,
    pub context_statements: usize,
}

/// Everything that determines a run's records. Paths and parallelism are
/// left out on purpose: they do not change outputs.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct RunConfig {
    pub corpus_id: String,
    pub split_id: String,
    pub split: SplitSpec,
    pub mode: Mode,
    pub subsets: Vec<Subset>,
    pub lengths: Lengths,
    pub sampling: Sampling,
    pub rounds: u32,
    pub short_circuit: bool,
    pub error_message: bool,
    pub repair_temperature: Temperature,
    pub checker: CheckerConfig,
    pub generator: GeneratorConfig,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn config_hash<T: Serialize>(config: &T) -> String {
    sha256_hex(&serde_json::to_vec(config).expect("configs serialize"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut text = serde_json::to_string_pretty(value).expect("artifacts serialize");
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Split ids plus the spec and the corpus they were drawn from.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct SplitArtifact {
    pub corpus_id: String,
    pub spec: SplitSpec,
    pub split: Split,
}

pub struct Workspace {
    pub root: PathBuf,
}

impl Workspace {
    pub fn new(root: &Path) -> Self {
        Workspace { root: root.to_path_buf() }
    }

    pub fn corpus_path(&self) -> PathBuf {
        self.root.join(CORPUS_FILE)
    }

    pub fn split_path(&self) -> PathBuf {
        self.root.join(SPLIT_FILE)
    }

    pub fn run_dir(&self, name: &str) -> PathBuf {
        self.root.join(RUNS_DIR).join(name)
    }

    /// Corpus archive and its id (digest of the archive bytes).
    pub fn load_corpus(&self) -> Result<(Corpus, String)> {
        let path = self.corpus_path();
        let bytes = fs::read(&path).with_context(|| format!("reading {} (run `ingest` first)", path.display()))?;
        let corpus = serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))?;
        Ok((corpus, sha256_hex(&bytes)))
    }

    /// Split artifact and its id.
    pub fn load_split(&self) -> Result<(SplitArtifact, String)> {
        let path = self.split_path();
        let bytes = fs::read(&path).with_context(|| format!("reading {} (run `split` first)", path.display()))?;
        let split = serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))?;
        Ok((split, sha256_hex(&bytes)))
    }
}

/// `t0.8.jsonl` for temperature 0.8.
pub fn log_file_name(t: Temperature) -> String {
    format!("t{t}.jsonl")
}
