//! Generate → check → repair loop, iterated repair and cost accounting.
//!
//! Records are emitted round by round; within a round they follow the order
//! of the theorems given to the pipeline, then sample index. Work inside a
//! round runs on a bounded pool, and results are put back in that order, so
//! logs do not depend on the degree of parallelism.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checker::{CheckOutcome, CheckRequest, Checker, DEFAULT_STEP_TIMEOUT_MS};
use crate::corpus::{Corpus, Theorem};
use crate::dataset::{self, DatasetError, Flavor, LengthConfig, TokenSeq, DEFAULT_CONTEXT_STATEMENTS};
use crate::generator::{self, CandidateProof, ProofGenerator, SamplingParams, Temperature};
use crate::util::bounded_map;
use crate::Scalar;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}: {reason}")]
    Format { path: String, line: usize, reason: String },
    #[error("rounds must be at least 1")]
    NoRounds,
}

/// One sampled candidate and its check. `round` 0 is generation, `k >= 1`
/// the k-th repair round; `parent` is the sample index of the repaired
/// round `k-1` attempt.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub theorem_id: String,
    pub round: u32,
    pub candidate: CandidateProof,
    pub outcome: CheckOutcome,
    pub cost_units: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<u32>,
}

impl AttemptRecord {
    pub fn sample_index(&self) -> u32 {
        self.candidate.sample_index
    }
}

/// Why a theorem (or one repair of it) produced no record.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipCause {
    /// The model input could not be built (e.g. statement too long).
    Example,
    /// Generator or checker transport failure.
    Backend,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct SkipRecord {
    pub theorem_id: String,
    pub round: u32,
    pub cause: SkipCause,
    pub reason: String,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogEntry {
    Attempt(AttemptRecord),
    Skip(SkipRecord),
}

impl LogEntry {
    pub fn attempt(&self) -> Option<&AttemptRecord> {
        match self {
            LogEntry::Attempt(a) => Some(a),
            LogEntry::Skip(_) => None,
        }
    }
}

pub fn attempts(entries: &[LogEntry]) -> impl Iterator<Item = &AttemptRecord> {
    entries.iter().filter_map(LogEntry::attempt)
}

pub fn skips(entries: &[LogEntry]) -> impl Iterator<Item = &SkipRecord> {
    entries.iter().filter_map(|e| match e {
        LogEntry::Skip(s) => Some(s),
        LogEntry::Attempt(_) => None,
    })
}

/// Serialized appends to a JSON-lines record log.
pub struct RecordSink {
    path: String,
    out: Mutex<BufWriter<File>>,
}

impl RecordSink {
    pub fn create(path: &Path) -> Result<Self, PipelineError> {
        let file = File::create(path).map_err(|source| PipelineError::Io { path: path.display().to_string(), source })?;
        Ok(RecordSink { path: path.display().to_string(), out: Mutex::new(BufWriter::new(file)) })
    }

    pub fn append(&self, entry: &LogEntry) -> Result<(), PipelineError> {
        let line = serde_json::to_string(entry).expect("log entries serialize");
        let mut out = self.out.lock().expect("sink lock");
        writeln!(out, "{line}").map_err(|source| PipelineError::Io { path: self.path.clone(), source })
    }

    pub fn append_all(&self, entries: &[LogEntry]) -> Result<(), PipelineError> {
        entries.iter().try_for_each(|e| self.append(e))
    }

    pub fn finish(self) -> Result<(), PipelineError> {
        let path = self.path;
        self.out.into_inner().expect("sink lock").flush().map_err(|source| PipelineError::Io { path, source })
    }
}

pub fn write_log(path: &Path, entries: &[LogEntry]) -> Result<(), PipelineError> {
    let sink = RecordSink::create(path)?;
    sink.append_all(entries)?;
    sink.finish()
}

pub fn read_log(path: &Path) -> Result<Vec<LogEntry>, PipelineError> {
    let p = path.display().to_string();
    let file = File::open(path).map_err(|source| PipelineError::Io { path: p.clone(), source })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| PipelineError::Io { path: p.clone(), source })?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line)
            .map_err(|e| PipelineError::Format { path: p.clone(), line: i + 1, reason: e.to_string() })?;
        out.push(entry);
    }
    Ok(out)
}

/// Written next to every record log.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub mode: String,
    pub split_id: String,
    pub seeds: Vec<u64>,
    pub temperatures: Vec<Temperature>,
    pub generator: String,
    pub repair_generator: Option<String>,
    pub checker: String,
    pub records: usize,
    pub skips: usize,
}

/// Inference cost in sampled sequences.
#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct CostLedger {
    pub per_theorem: BTreeMap<String, u64>,
}

impl CostLedger {
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a AttemptRecord>) -> Self {
        let mut per_theorem = BTreeMap::new();
        for r in records {
            *per_theorem.entry(r.theorem_id.clone()).or_insert(0) += u64::from(r.cost_units);
        }
        CostLedger { per_theorem }
    }

    pub fn total(&self) -> u64 {
        self.per_theorem.values().sum()
    }

    pub fn max(&self) -> u64 {
        self.per_theorem.values().copied().max().unwrap_or(0)
    }

    /// Mean per-theorem cost; zero for an empty ledger.
    pub fn mean<S: Scalar>(&self) -> S {
        if self.per_theorem.is_empty() {
            return S::zero();
        }
        S::from_counts(self.total(), self.per_theorem.len() as u64)
    }
}

pub fn ledger(entries: &[LogEntry]) -> CostLedger {
    CostLedger::from_records(attempts(entries))
}

/// Input format of round-0 generation.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputFlavor {
    Generate,
    GenerateWithContext,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub flavor: InputFlavor,
    pub generation_lengths: LengthConfig,
    pub repair_lengths: LengthConfig,
    pub context_statements: usize,
    /// Stop sampling a theorem after its first success (deployment mode).
    pub short_circuit: bool,
    /// Include the checker message in repair inputs.
    pub error_message: bool,
    pub repair_temperature: Temperature,
    pub step_timeout_ms: u64,
    pub parallelism: usize,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            flavor: InputFlavor::Generate,
            generation_lengths: LengthConfig::for_flavor(Flavor::Generate),
            repair_lengths: LengthConfig::for_flavor(Flavor::Repair),
            context_statements: DEFAULT_CONTEXT_STATEMENTS,
            short_circuit: false,
            error_message: true,
            repair_temperature: Temperature::ZERO,
            step_timeout_ms: DEFAULT_STEP_TIMEOUT_MS,
            parallelism: 1,
        }
    }
}

pub struct Pipeline<'a> {
    pub corpus: &'a Corpus,
    pub generator: &'a dyn ProofGenerator,
    pub repairer: &'a dyn ProofGenerator,
    pub checker: &'a Checker,
    pub opts: PipelineOptions,
}

fn skip(thm: &Theorem, round: u32, cause: SkipCause, reason: impl ToString) -> LogEntry {
    LogEntry::Skip(SkipRecord { theorem_id: thm.id.clone(), round, cause, reason: reason.to_string() })
}

impl<'a> Pipeline<'a> {
    pub fn new(corpus: &'a Corpus, generator: &'a dyn ProofGenerator, checker: &'a Checker) -> Self {
        Pipeline { corpus, generator, repairer: generator, checker, opts: PipelineOptions::default() }
    }

    pub fn with_repairer(mut self, repairer: &'a dyn ProofGenerator) -> Self {
        self.repairer = repairer;
        self
    }

    pub fn with_options(mut self, opts: PipelineOptions) -> Self {
        self.opts = opts;
        self
    }

    /// Resolve theorem ids; unknown ids are dropped.
    pub fn theorems(&self, ids: &[String]) -> Vec<&'a Theorem> {
        let corpus: &'a Corpus = self.corpus;
        ids.iter().filter_map(|id| corpus.theorem(id)).collect()
    }

    fn generation_input(&self, thm: &Theorem) -> Result<TokenSeq, DatasetError> {
        let cfg = &self.opts.generation_lengths;
        let ex = match self.opts.flavor {
            InputFlavor::Generate => dataset::build_generation_input(thm, cfg)?,
            InputFlavor::GenerateWithContext => {
                dataset::build_context_input(self.corpus, thm, cfg, self.opts.context_statements)?
            }
        };
        Ok(ex)
    }

    fn request(&self, thm: &Theorem, proof: &str) -> CheckRequest {
        CheckRequest {
            theorem_id: thm.id.clone(),
            theory_context: self.corpus.theory_context(thm),
            statement: thm.statement_text.clone(),
            candidate_proof: proof.to_string(),
            step_timeout_ms: self.opts.step_timeout_ms,
        }
    }

    fn attempt(&self, thm: &Theorem, round: u32, candidate: CandidateProof, parent: Option<u32>) -> LogEntry {
        match self.checker.check(&self.request(thm, &candidate.text)) {
            Ok(outcome) => LogEntry::Attempt(AttemptRecord {
                theorem_id: thm.id.clone(),
                round,
                candidate,
                outcome,
                cost_units: 1,
                parent,
            }),
            Err(e) => skip(thm, round, SkipCause::Backend, e),
        }
    }

    fn generate_one(&self, thm: &Theorem, params: &SamplingParams) -> Vec<LogEntry> {
        let input = match self.generation_input(thm) {
            Ok(i) => i,
            Err(e) => return vec![skip(thm, 0, SkipCause::Example, e)],
        };
        let mut out = Vec::new();
        if !self.opts.short_circuit {
            let candidates = match generator::sample(self.generator, &thm.id, &input, params) {
                Ok(c) => c,
                Err(e) => return vec![skip(thm, 0, SkipCause::Backend, e)],
            };
            out.extend(candidates.into_iter().map(|c| self.attempt(thm, 0, c, None)));
            return out;
        }
        // one sample per call; sample i uses seed + i, as in a batched call
        for i in 0..params.n_samples {
            let single = SamplingParams { n_samples: 1, seed: params.seed.wrapping_add(u64::from(i)), ..*params };
            let mut c = match generator::sample(self.generator, &thm.id, &input, &single) {
                Ok(mut c) => c.remove(0),
                Err(e) => {
                    out.push(skip(thm, 0, SkipCause::Backend, e));
                    break;
                }
            };
            c.params = *params;
            c.sample_index = i;
            let entry = self.attempt(thm, 0, c, None);
            let done = entry.attempt().is_some_and(|a| a.outcome.is_success());
            out.push(entry);
            if done {
                break;
            }
        }
        out
    }

    /// Round 0: sample and check candidates for every theorem.
    pub fn run_generate(&self, thms: &[&Theorem], params: &SamplingParams) -> Vec<LogEntry> {
        bounded_map(self.opts.parallelism, thms, |t| self.generate_one(t, params)).into_iter().flatten().collect()
    }

    fn repair_one(&self, thm: &Theorem, failures: &[&AttemptRecord], round: u32, seed: u64) -> Vec<LogEntry> {
        let mut seen = HashSet::new();
        let distinct: Vec<&&AttemptRecord> = failures.iter().filter(|f| seen.insert(f.candidate.text.as_str())).collect();
        let params = SamplingParams {
            n_samples: 1,
            temperature: self.opts.repair_temperature,
            seed,
            ..failures.first().map(|f| f.candidate.params).unwrap_or_default()
        };
        let mut out = Vec::new();
        for (j, failure) in distinct.into_iter().enumerate() {
            let message = self.opts.error_message.then_some(failure.outcome.message.as_str());
            let text = match dataset::fit_repair_input(thm, &failure.candidate.text, message, self.opts.repair_lengths.max_input) {
                Ok(t) => t,
                Err(e) => {
                    out.push(skip(thm, round, SkipCause::Example, e));
                    continue;
                }
            };
            match generator::sample(self.repairer, &thm.id, &dataset::tokenize(&text), &params) {
                Ok(mut c) => {
                    let mut c = c.remove(0);
                    c.sample_index = j as u32;
                    out.push(self.attempt(thm, round, c, Some(failure.sample_index())));
                }
                Err(e) => out.push(skip(thm, round, SkipCause::Backend, e)),
            }
        }
        out
    }

    /// One repair round over failed attempts of round `round - 1`. Failures
    /// are deduplicated per theorem by candidate text and each distinct one
    /// is repaired once.
    pub fn repair_round(&self, failures: &[&AttemptRecord], round: u32, seed: u64) -> Vec<LogEntry> {
        let mut order: Vec<&str> = Vec::new();
        let mut by_thm: BTreeMap<&str, Vec<&AttemptRecord>> = BTreeMap::new();
        for f in failures.iter().filter(|f| !f.outcome.is_success()) {
            let v = by_thm.entry(f.theorem_id.as_str()).or_default();
            if v.is_empty() {
                order.push(f.theorem_id.as_str());
            }
            v.push(f);
        }
        let work: Vec<(&Theorem, &Vec<&AttemptRecord>)> =
            order.iter().filter_map(|id| Some((self.corpus.theorem(id)?, &by_thm[id]))).collect();
        bounded_map(self.opts.parallelism, &work, |(thm, fs)| self.repair_one(thm, fs, round, seed))
            .into_iter()
            .flatten()
            .collect()
    }

    /// Generation with `params`, then one repair round over the failures of
    /// theorems that were not proven.
    pub fn generate_and_repair(&self, thms: &[&Theorem], params: &SamplingParams) -> Vec<LogEntry> {
        let mut log = self.run_generate(thms, params);
        let round1 = self.repair_round(&open_failures(&log, 0), 1, params.seed);
        log.extend(round1);
        log
    }

    /// One greedy generation sample per theorem, then `rounds` repair rounds,
    /// each repairing the previous round's failures of still-open theorems.
    pub fn iterated_repair(&self, thms: &[&Theorem], seed: u64, top_k: u32, max_new_tokens: u32, rounds: u32) -> Result<Vec<LogEntry>, PipelineError> {
        if rounds == 0 {
            return Err(PipelineError::NoRounds);
        }
        let params = SamplingParams { n_samples: 1, temperature: Temperature::ZERO, top_k, max_new_tokens, seed };
        let mut log = self.run_generate(thms, &params);
        for k in 1..=rounds {
            let next = self.repair_round(&open_failures(&log, k - 1), k, seed);
            if next.is_empty() {
                break;
            }
            log.extend(next);
        }
        Ok(log)
    }
}

/// Failed attempts of `round` for theorems with no success so far.
pub fn open_failures(log: &[LogEntry], round: u32) -> Vec<&AttemptRecord> {
    let proven: BTreeSet<&str> = attempts(log).filter(|a| a.outcome.is_success()).map(|a| a.theorem_id.as_str()).collect();
    attempts(log).filter(|a| a.round == round && !a.outcome.is_success() && !proven.contains(a.theorem_id.as_str())).collect()
}

/// Theorems with at least one success.
pub fn proven(log: &[LogEntry]) -> BTreeSet<String> {
    attempts(log).filter(|a| a.outcome.is_success()).map(|a| a.theorem_id.clone()).collect()
}
