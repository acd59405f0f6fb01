//! Model examples: byte-level tokens plus the generation, context and repair
//! input formats with their length contracts.
//!
//! Inputs are cut on the left (context is expendable, the statement is not),
//! targets on the right. Repair inputs put the statement first, so for them
//! the failed proof is shortened before the error message and the statement
//! is never cut.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::checker::{CheckRequest, Checker, CheckerError};
use crate::corpus::{Corpus, Theorem};
use crate::generator::{self, GeneratorError, ProofGenerator, SamplingParams};
use crate::util::bounded_map;

/// Separator between the segments of a repair input.
pub const SEP: &str = "\n<|sep|>\n";

pub const DEFAULT_CONTEXT_STATEMENTS: usize = 50;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("statement of {theorem_id} needs {len} tokens, limit is {max}")]
    StatementTooLong { theorem_id: String, len: usize, max: usize },
    #[error("{0} has no ground-truth proof")]
    MissingProof(String),
    #[error("unknown theorem {0}")]
    UnknownTheorem(String),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error(transparent)]
    Checker(#[from] CheckerError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}: {reason}")]
    Format { path: String, line: usize, reason: String },
}

/// Byte-level token sequence: one token per UTF-8 byte, ids 0..=255.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct TokenSeq {
    pub tokens: Vec<u32>,
    pub text: String,
}

impl TokenSeq {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

pub fn tokenize(s: &str) -> TokenSeq {
    TokenSeq { tokens: s.bytes().map(u32::from).collect(), text: s.to_string() }
}

pub fn detokenize(t: &TokenSeq) -> String {
    decode(&t.tokens).unwrap_or_else(|| t.text.clone())
}

/// Decode raw token ids; `None` for ids above 255 or invalid UTF-8.
pub fn decode(tokens: &[u32]) -> Option<String> {
    let bytes = tokens.iter().map(|&t| u8::try_from(t).ok()).collect::<Option<Vec<u8>>>()?;
    String::from_utf8(bytes).ok()
}

/// Longest prefix of at most `max` tokens that ends on a character boundary.
pub fn truncate_right(s: &str, max: usize) -> &str {
    if s.len() <= max {
        return s;
    }
    let mut end = max;
    while !s.is_char_boundary(end) {
        end -= 1;
    }
    &s[..end]
}

/// Longest suffix of at most `max` tokens that starts on a character boundary.
pub fn truncate_left(s: &str, max: usize) -> &str {
    if s.len() <= max {
        return s;
    }
    let mut start = s.len() - max;
    while !s.is_char_boundary(start) {
        start += 1;
    }
    &s[start..]
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    Generate,
    GenerateWithContext,
    Repair,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct LengthConfig {
    pub max_input: usize,
    pub max_target: usize,
}

impl LengthConfig {
    pub const GENERATION: LengthConfig = LengthConfig { max_input: 1536, max_target: 512 };
    pub const REPAIR: LengthConfig = LengthConfig { max_input: 1024, max_target: 1024 };

    pub fn for_flavor(flavor: Flavor) -> Self {
        match flavor {
            Flavor::Generate | Flavor::GenerateWithContext => Self::GENERATION,
            Flavor::Repair => Self::REPAIR,
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Example {
    pub flavor: Flavor,
    pub theorem_id: String,
    pub input: TokenSeq,
    pub target: TokenSeq,
}

/// One line of an example file. Field order is the on-disk order.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub flavor: Flavor,
    pub theorem_id: String,
    pub input_text: String,
    pub target_text: String,
    pub input_tokens: Vec<u32>,
    pub target_tokens: Vec<u32>,
}

impl From<&Example> for ExampleRecord {
    fn from(e: &Example) -> Self {
        ExampleRecord {
            flavor: e.flavor,
            theorem_id: e.theorem_id.clone(),
            input_text: e.input.text.clone(),
            target_text: e.target.text.clone(),
            input_tokens: e.input.tokens.clone(),
            target_tokens: e.target.tokens.clone(),
        }
    }
}

impl From<ExampleRecord> for Example {
    fn from(r: ExampleRecord) -> Self {
        Example {
            flavor: r.flavor,
            theorem_id: r.theorem_id,
            input: TokenSeq { tokens: r.input_tokens, text: r.input_text },
            target: TokenSeq { tokens: r.target_tokens, text: r.target_text },
        }
    }
}

fn statement_fits(thm: &Theorem, max: usize) -> Result<(), DatasetError> {
    let len = thm.statement_text.len();
    if len > max {
        return Err(DatasetError::StatementTooLong { theorem_id: thm.id.clone(), len, max });
    }
    Ok(())
}

fn target_of(thm: &Theorem, cfg: &LengthConfig) -> Result<TokenSeq, DatasetError> {
    if thm.proof_steps.is_empty() {
        return Err(DatasetError::MissingProof(thm.id.clone()));
    }
    Ok(tokenize(truncate_right(&thm.proof_text(), cfg.max_target)))
}

pub fn build_generation_input(thm: &Theorem, cfg: &LengthConfig) -> Result<TokenSeq, DatasetError> {
    statement_fits(thm, cfg.max_input)?;
    Ok(tokenize(&thm.statement_text))
}

/// Input: the statement. Target: the proof, cut on the right.
pub fn build_generation_example(thm: &Theorem, cfg: &LengthConfig) -> Result<Example, DatasetError> {
    Ok(Example {
        flavor: Flavor::Generate,
        theorem_id: thm.id.clone(),
        input: build_generation_input(thm, cfg)?,
        target: target_of(thm, cfg)?,
    })
}

/// Up to `max_statements` statements preceding `thm` in its file, then the
/// statement itself, newline separated. No truncation.
pub fn context_text(corpus: &Corpus, thm: &Theorem, max_statements: usize) -> String {
    let preceding = corpus.preceding_statements(thm);
    let from = preceding.len().saturating_sub(max_statements);
    let mut out = String::new();
    for s in &preceding[from..] {
        out.push_str(&s.text);
        out.push('\n');
    }
    out.push_str(&thm.statement_text);
    out
}

/// Context text cut on the left to `cfg.max_input`.
pub fn build_context_input(
    corpus: &Corpus,
    thm: &Theorem,
    cfg: &LengthConfig,
    max_statements: usize,
) -> Result<TokenSeq, DatasetError> {
    statement_fits(thm, cfg.max_input)?;
    let full = context_text(corpus, thm, max_statements);
    Ok(tokenize(truncate_left(&full, cfg.max_input)))
}

pub fn build_context_example(
    corpus: &Corpus,
    thm: &Theorem,
    cfg: &LengthConfig,
    max_statements: usize,
) -> Result<Example, DatasetError> {
    Ok(Example {
        flavor: Flavor::GenerateWithContext,
        theorem_id: thm.id.clone(),
        input: build_context_input(corpus, thm, cfg, max_statements)?,
        target: target_of(thm, cfg)?,
    })
}

/// `statement SEP failed_proof SEP message`; a missing message leaves the
/// last segment empty.
pub fn repair_input_text(statement: &str, failed_proof: &str, message: Option<&str>) -> String {
    format!("{statement}{SEP}{failed_proof}{SEP}{}", message.unwrap_or(""))
}

/// Repair input fitted to `max_input` tokens.
pub fn fit_repair_input(
    thm: &Theorem,
    failed_proof: &str,
    message: Option<&str>,
    max_input: usize,
) -> Result<String, DatasetError> {
    let fixed = thm.statement_text.len() + 2 * SEP.len();
    if fixed > max_input {
        return Err(DatasetError::StatementTooLong { theorem_id: thm.id.clone(), len: fixed, max: max_input });
    }
    let room = max_input - fixed;
    let message = message.map(|m| truncate_right(m, room));
    let room = room - message.map_or(0, str::len);
    Ok(repair_input_text(&thm.statement_text, truncate_right(failed_proof, room), message))
}

/// Segments of a repair input.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct RepairParts<'a> {
    pub statement: &'a str,
    pub failed_proof: &'a str,
    pub message: &'a str,
}

pub fn split_repair_input(text: &str) -> Option<RepairParts<'_>> {
    let (statement, rest) = text.split_once(SEP)?;
    let (failed_proof, message) = rest.split_once(SEP)?;
    Some(RepairParts { statement, failed_proof, message })
}

/// Input: statement, failed proof and checker message. Target: the
/// ground-truth proof.
pub fn build_repair_example(
    thm: &Theorem,
    failed_proof: &str,
    message: Option<&str>,
    cfg: &LengthConfig,
) -> Result<Example, DatasetError> {
    Ok(Example {
        flavor: Flavor::Repair,
        theorem_id: thm.id.clone(),
        input: tokenize(&fit_repair_input(thm, failed_proof, message, cfg.max_input)?),
        target: target_of(thm, cfg)?,
    })
}

#[derive(Clone, Copy, Debug)]
pub struct RepairDatasetOptions {
    /// Seed of the single greedy sample drawn per theorem.
    pub seed: u64,
    pub max_new_tokens: u32,
    pub generation_lengths: LengthConfig,
    pub repair_lengths: LengthConfig,
    pub step_timeout_ms: u64,
    pub parallelism: usize,
}

impl Default for RepairDatasetOptions {
    fn default() -> Self {
        RepairDatasetOptions {
            seed: 0,
            max_new_tokens: generator::DEFAULT_MAX_NEW_TOKENS,
            generation_lengths: LengthConfig::GENERATION,
            repair_lengths: LengthConfig::REPAIR,
            step_timeout_ms: crate::checker::DEFAULT_STEP_TIMEOUT_MS,
            parallelism: 1,
        }
    }
}

/// Sample one proof at temperature 0 per training theorem, check it, and
/// turn every failure into a repair example (ground truth as target).
/// Output follows `train` order.
pub fn build_repair_dataset(
    corpus: &Corpus,
    train: &[String],
    generator: &dyn ProofGenerator,
    checker: &Checker,
    opts: &RepairDatasetOptions,
) -> Result<Vec<Example>, DatasetError> {
    let index = corpus.index();
    let thms = train
        .iter()
        .map(|id| index.get(id.as_str()).copied().ok_or_else(|| DatasetError::UnknownTheorem(id.clone())))
        .collect::<Result<Vec<_>, _>>()?;
    let params = SamplingParams { max_new_tokens: opts.max_new_tokens, ..SamplingParams::greedy(opts.seed) };
    let results = bounded_map(opts.parallelism, &thms, |thm| -> Result<Option<Example>, DatasetError> {
        let input = build_generation_example(thm, &opts.generation_lengths)?.input;
        let candidate = generator::sample(generator, &thm.id, &input, &params)?.remove(0);
        let req = CheckRequest {
            theorem_id: thm.id.clone(),
            theory_context: corpus.theory_context(thm),
            statement: thm.statement_text.clone(),
            candidate_proof: candidate.text.clone(),
            step_timeout_ms: opts.step_timeout_ms,
        };
        let outcome = checker.check(&req)?;
        if outcome.is_success() {
            return Ok(None);
        }
        build_repair_example(thm, &candidate.text, Some(&outcome.message), &opts.repair_lengths).map(Some)
    });
    results.into_iter().filter_map(Result::transpose).collect()
}

/// Write examples as JSON lines.
pub fn write_examples(path: &Path, examples: &[Example]) -> Result<(), DatasetError> {
    let io = |source| DatasetError::Io { path: path.display().to_string(), source };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for e in examples {
        let line = serde_json::to_string(&ExampleRecord::from(e)).expect("example records serialize");
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_examples(path: &Path) -> Result<Vec<Example>, DatasetError> {
    let io = |source| DatasetError::Io { path: path.display().to_string(), source };
    let r = BufReader::new(File::open(path).map_err(io)?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ExampleRecord = serde_json::from_str(&line).map_err(|e| DatasetError::Format {
            path: path.display().to_string(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        out.push(rec.into());
    }
    Ok(out)
}


#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn round_trip_random_strings(s in proptest::collection::vec(any::<char>(), 0..256).prop_map(|v| v.into_iter().collect::<String>())) {
            let t = tokenize(&s);
            prop_assert_eq!(t.len(), s.len());
            prop_assert_eq!(detokenize(&t), s);
        }

        #[test]
        fn truncation_bounds(s in ".{0,64}", max in 0usize..80) {
            prop_assert!(truncate_left(&s, max).len() <= max);
            prop_assert!(s.ends_with(truncate_left(&s, max)));
            prop_assert!(truncate_right(&s, max).len() <= max);
            prop_assert!(s.starts_with(truncate_right(&s, max)));
            prop_assert!(max < 4 || truncate_left(&s, max).len() + 3 >= max.min(s.len()));
        }
    }
}
