use std::collections::{BTreeSet, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GeneratorError, ProofGenerator, SamplingParams};
use crate::checker::contains_skip_keyword;
use crate::corpus::Corpus;
use crate::dataset::{self, TokenSeq};
use crate::util::{stable_hash, unit_interval};

/// Fallback emitted for inputs the mock knows nothing about.
pub const FALLBACK_PROOF: &str = "sorry";

/// How well a statement is memorized for plain generation.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Recall {
    /// Greedy decoding returns the ground truth.
    Exact,
    /// Greedy decoding returns `decoy`; sampling at t > 0 recovers the ground
    /// truth with probability proportional to t.
    Fuzzy { decoy: Vec<String> },
    /// Generation falls back to `sorry`; only repair inputs use the memory.
    RepairOnly,
}

/// Repair behaviour on repair-flavored inputs.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum RepairSkill {
    /// Treat repair inputs like generation inputs for their statement.
    None,
    /// Use the error line from the message: steps up to that line are
    /// replaced by the ground truth, the tail of the failed proof is kept
    /// (aligned from the end). Without a message, behaves like generation.
    StepFix,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct MockEntry {
    pub proof: Vec<String>,
    /// Rule ids available to the theorem; source of rule-swap mutations.
    pub rule_ids: Vec<String>,
    pub recall: Recall,
}

#[derive(Clone, Copy, PartialEq, Debug)]
pub struct MockConfig {
    /// Fraction of theorems outside the memorized split that are recalled exactly.
    pub recall: f64,
    /// Fraction (after `recall`) recalled fuzzily.
    pub fuzzy: f64,
    /// Per-step edit probability per unit of temperature.
    pub mutation_rate: f64,
    pub repair: RepairSkill,
    pub seed: u64,
}

impl Default for MockConfig {
    fn default() -> Self {
        MockConfig { recall: 0.5, fuzzy: 0.25, mutation_rate: 0.25, repair: RepairSkill::StepFix, seed: 0 }
    }
}

/// Deterministic retrieval-plus-mutation generator.
///
/// Statements are memorized with their ground-truth proofs. Greedy decoding
/// (temperature 0) returns the memorized proof (or a decoy, or `sorry`,
/// depending on [`Recall`]) for every sample. At t > 0 each step is edited
/// with probability `t * mutation_rate`: deleted, duplicated, or its rule
/// swapped for another of the theorem's rule ids (at most `top_k` choices).
///
/// Sample `i` of a call with seed `s` depends only on `(s + i, input)`, so a
/// run drawn one sample at a time with seeds `s, s+1, ...` reproduces a
/// batched run.
#[derive(Clone, Debug)]
pub struct MockGenerator {
    entries: HashMap<String, MockEntry>,
    mutation_rate: f64,
    repair: RepairSkill,
    label: String,
}

fn error_line(message: &str) -> Option<usize> {
    let start = message.rfind("(line ")? + "(line ".len();
    let rest = &message[start..];
    rest[..rest.find(')')?].trim().parse().ok()
}

impl MockGenerator {
    pub fn new(repair: RepairSkill, mutation_rate: f64) -> Self {
        MockGenerator { entries: HashMap::new(), mutation_rate, repair, label: "mock".into() }
    }

    pub fn insert(&mut self, statement: impl Into<String>, entry: MockEntry) {
        self.entries.insert(statement.into(), entry);
    }

    pub fn entry(&self, statement: &str) -> Option<&MockEntry> {
        self.entries.get(statement)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Memorize every proof in the corpus. Theorems in `memorized` are always
    /// recalled exactly; the others get a seeded recall tier.
    pub fn from_corpus(corpus: &Corpus, memorized: &[String], cfg: MockConfig) -> Self {
        let memorized: HashSet<&str> = memorized.iter().map(String::as_str).collect();
        let mut mock = MockGenerator::new(cfg.repair, cfg.mutation_rate);
        mock.label = format!(
            "mock(recall={},fuzzy={},mutation={},repair={:?},seed={})",
            cfg.recall, cfg.fuzzy, cfg.mutation_rate, cfg.repair, cfg.seed
        );
        for thm in corpus.theorems.iter().filter(|t| !t.proof_steps.is_empty()) {
            let rule_ids: Vec<String> = corpus
                .file(&thm.file)
                .map(|f| f.rules(thm.index_in_file).ids().map(String::from).collect())
                .unwrap_or_default();
            let recall = if memorized.contains(thm.id.as_str()) {
                Recall::Exact
            } else {
                let u = unit_interval(cfg.seed, &thm.id);
                if u < cfg.recall {
                    Recall::Exact
                } else if u < cfg.recall + cfg.fuzzy {
                    Recall::Fuzzy { decoy: decoy(&thm.proof_steps, &rule_ids, stable_hash(&[&cfg.seed.to_le_bytes(), thm.id.as_bytes()])) }
                } else {
                    Recall::RepairOnly
                }
            };
            // statements are the lookup key; on a clash the first theorem wins
            mock.entries.entry(thm.statement_text.clone()).or_insert(MockEntry { proof: thm.proof_steps.clone(), rule_ids, recall });
        }
        mock
    }

    fn sample_one(&self, entry: &MockEntry, base: Option<Vec<String>>, input: &str, params: &SamplingParams, index: u32) -> String {
        let t = params.temperature.as_f64();
        let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(&[&params.seed.wrapping_add(index as u64).to_le_bytes(), input.as_bytes()]));
        let steps = match base {
            Some(steps) => steps,
            None => match &entry.recall {
                Recall::Exact => entry.proof.clone(),
                Recall::Fuzzy { decoy } => {
                    if t > 0.0 && rng.gen_bool((t * 0.75).min(1.0)) {
                        entry.proof.clone()
                    } else {
                        decoy.clone()
                    }
                }
                Recall::RepairOnly => return FALLBACK_PROOF.to_string(),
            },
        };
        let steps = if t > 0.0 { self.mutate(steps, entry, t, params.top_k, &mut rng) } else { steps };
        steps.join("\n")
    }

    fn mutate(&self, steps: Vec<String>, entry: &MockEntry, t: f64, top_k: u32, rng: &mut ChaCha8Rng) -> Vec<String> {
        let p = (t * self.mutation_rate).clamp(0.0, 1.0);
        let choices: Vec<&String> = entry.rule_ids.iter().take(top_k.max(1) as usize).collect();
        let mut out = Vec::with_capacity(steps.len() + 2);
        for step in steps {
            if !rng.gen_bool(p) {
                out.push(step);
                continue;
            }
            match rng.gen_range(0..3) {
                0 => {}
                1 => match swap_rule(&step, &choices, rng) {
                    Some(swapped) => out.push(swapped),
                    None => {
                        out.push(step.clone());
                        out.push(step);
                    }
                },
                _ => {
                    out.push(step.clone());
                    out.push(step);
                }
            }
        }
        out
    }

    fn repair(&self, entry: &MockEntry, failed: &str, message: &str) -> Vec<String> {
        let line = error_line(message).unwrap_or(1);
        let kept: Vec<String> = failed
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !contains_skip_keyword(l))
            .map(String::from)
            .collect();
        let truth = &entry.proof;
        let prefix = line.min(truth.len());
        let tail_len = truth.len() - prefix;
        let mut out = truth[..prefix].to_vec();
        if kept.len() >= tail_len {
            out.extend_from_slice(&kept[kept.len() - tail_len..]);
        } else {
            out.extend_from_slice(&truth[prefix..]);
        }
        out
    }
}

fn swap_rule(step: &str, choices: &[&String], rng: &mut ChaCha8Rng) -> Option<String> {
    let words: Vec<&str> = step.split_whitespace().collect();
    let (prefix, current) = match words.as_slice() {
        ["rw", "<-", id] => ("rw <- ", *id),
        ["rw", id] => ("rw ", *id),
        _ => return None,
    };
    let others: Vec<&&String> = choices.iter().filter(|c| c.as_str() != current).collect();
    others.choose(rng).map(|id| format!("{prefix}{id}"))
}

/// Ground truth with one or two rule swaps (falls back to dropping the
/// first step when there is nothing to swap).
fn decoy(proof: &[String], rule_ids: &[String], seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let choices: Vec<&String> = rule_ids.iter().collect();
    let rewrite_lines: Vec<usize> = (0..proof.len()).filter(|&i| proof[i].starts_with("rw")).collect();
    let n_swaps = if rewrite_lines.len() >= 2 { 2 } else { 1 };
    let picked: BTreeSet<usize> = rewrite_lines.choose_multiple(&mut rng, n_swaps).copied().collect();
    let mut out = proof.to_vec();
    let mut changed = false;
    for i in picked {
        if let Some(s) = swap_rule(&out[i], &choices, &mut rng) {
            out[i] = s;
            changed = true;
        }
    }
    if !changed {
        out.remove(0);
    }
    out
}

impl ProofGenerator for MockGenerator {
    fn id(&self) -> String {
        self.label.clone()
    }

    fn generate(&self, input: &TokenSeq, params: &SamplingParams) -> Result<Vec<String>, GeneratorError> {
        let n = params.n_samples;
        let text = input.text.as_str();
        let (statement, repair) = match dataset::split_repair_input(text) {
            Some(parts) => (parts.statement, Some((parts.failed_proof, parts.message))),
            None => (text.rsplit('\n').next().unwrap_or(text), None),
        };
        let Some(entry) = self.entries.get(text).or_else(|| self.entries.get(statement)) else {
            return Ok(vec![FALLBACK_PROOF.to_string(); n as usize]);
        };
        let base = match repair {
            Some((failed, message)) if self.repair == RepairSkill::StepFix && !message.trim().is_empty() => {
                Some(self.repair(entry, failed, message))
            }
            _ => None,
        };
        Ok((0..n).map(|i| self.sample_one(entry, base.clone(), text, params, i)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{repair_input_text, tokenize};
    use crate::generator::Temperature;

    fn mock() -> MockGenerator {
        let mut m = MockGenerator::new(RepairSkill::StepFix, 0.5);
        m.insert(
            "lemma l: add(a, 0) = a",
            MockEntry {
                proof: vec!["rw add0".into(), "refl".into()],
                rule_ids: vec!["add0".into(), "adds".into(), "mul0".into()],
                recall: Recall::Exact,
            },
        );
        m.insert(
            "lemma u: f(a) = a",
            MockEntry { proof: vec!["rw fa".into(), "refl".into()], rule_ids: vec!["fa".into()], recall: Recall::RepairOnly },
        );
        m
    }

    fn params(n: u32, t: &str, seed: u64) -> SamplingParams {
        SamplingParams { n_samples: n, temperature: t.parse::<Temperature>().unwrap(), seed, ..Default::default() }
    }

    #[test]
    fn greedy_is_constant_and_exact() {
        let out = mock().generate(&tokenize("lemma l: add(a, 0) = a"), &params(5, "0", 1)).unwrap();
        assert_eq!(out, vec!["rw add0\nrefl"; 5]);
    }

    #[test]
    fn unknown_and_repair_only_fall_back_to_sorry() {
        let m = mock();
        assert_eq!(m.generate(&tokenize("lemma z: b = b"), &params(2, "0.8", 0)).unwrap(), vec!["sorry"; 2]);
        assert_eq!(m.generate(&tokenize("lemma u: f(a) = a"), &params(1, "0", 0)).unwrap(), vec!["sorry"]);
    }

    #[test]
    fn context_inputs_use_the_last_line() {
        let m = mock();
        let out = m.generate(&tokenize("axiom add0: add(x, 0) = x\nlemma l: add(a, 0) = a"), &params(1, "0", 0)).unwrap();
        assert_eq!(out, vec!["rw add0\nrefl"]);
    }

    #[test]
    fn sampling_is_seeded_and_prefix_stable() {
        let m = mock();
        let input = tokenize("lemma l: add(a, 0) = a");
        let a = m.generate(&input, &params(16, "1.4", 9)).unwrap();
        assert_eq!(a, m.generate(&input, &params(16, "1.4", 9)).unwrap());
        assert!(a.iter().any(|s| s != "rw add0\nrefl"), "high temperature should mutate something");
        for i in 0..16u32 {
            let one = m.generate(&input, &params(1, "1.4", 9 + i as u64)).unwrap();
            assert_eq!(one[0], a[i as usize]);
        }
    }

    #[test]
    fn repair_uses_the_error_line() {
        let m = mock();
        let input = repair_input_text("lemma u: f(a) = a", "sorry", Some("Rejected: ...\nAt command \"sorry\" (line 1)"));
        assert_eq!(m.generate(&tokenize(&input), &params(1, "0", 0)).unwrap(), vec!["rw fa\nrefl"]);
        // without the message the mock behaves like generation
        let blind = repair_input_text("lemma u: f(a) = a", "sorry", None);
        assert_eq!(m.generate(&tokenize(&blind), &params(1, "0", 0)).unwrap(), vec!["sorry"]);
    }

    #[test]
    fn step_fix_keeps_the_aligned_tail() {
        let entry = MockEntry {
            proof: ["rw a", "rw b", "rw c", "refl"].map(String::from).to_vec(),
            rule_ids: vec![],
            recall: Recall::Exact,
        };
        let m = MockGenerator::new(RepairSkill::StepFix, 0.0);
        let failed = "rw x\nrw b\nrw y\nrefl";
        assert_eq!(m.repair(&entry, failed, "(line 1)"), ["rw a", "rw b", "rw y", "refl"]);
        assert_eq!(m.repair(&entry, "rw a\nrw b\nrw y\nrefl", "(line 3)"), ["rw a", "rw b", "rw c", "refl"]);
        // a deleted step: the tail still lines up from the end
        assert_eq!(m.repair(&entry, "rw a\nrw c\nrefl", "(line 2)"), ["rw a", "rw b", "rw c", "refl"]);
        assert_eq!(error_line("Step error: x\nAt command \"rw\" (line 12)"), Some(12));
        assert_eq!(error_line("nothing"), None);
    }

    #[test]
    fn decoys_differ_from_truth() {
        let proof: Vec<String> = ["rw a", "rw b", "refl"].map(String::from).to_vec();
        let ids: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
        for seed in 0..20 {
            assert_ne!(decoy(&proof, &ids, seed), proof);
        }
        assert_eq!(decoy(&proof, &[], 0), ["rw b", "refl"]);
    }
}
