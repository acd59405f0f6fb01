//! Proof-generator backends.
//!
//! A backend turns an input text into `n_samples` candidate proofs. Backends
//! see temperature as an opaque knob; choosing temperatures is the
//! evaluation layer's job.

mod mock;
mod remote;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{self, TokenSeq};

pub use mock::{MockConfig, MockEntry, MockGenerator, Recall, RepairSkill};
pub use remote::{GenerateRequest, GenerateResponse, RemoteGenerator};

pub const DEFAULT_TOP_K: u32 = 40;
pub const DEFAULT_MAX_NEW_TOKENS: u32 = 256;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GeneratorError {
    #[error("generator backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("generator backend rejected the request: {0}")]
    BackendRejected(String),
    #[error("input of {len} tokens exceeds the backend limit of {max}")]
    Oversized { len: usize, max: usize },
    #[error("generator protocol violation: {0}")]
    Protocol(String),
}

/// Sampling temperature, stored exactly in thousandths.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Temperature(u32);

impl Temperature {
    pub const ZERO: Temperature = Temperature(0);

    pub fn from_millis(m: u32) -> Self {
        Temperature(m)
    }

    pub fn millis(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub fn from_f64(v: f64) -> Option<Self> {
        (v.is_finite() && v >= 0.0 && v <= u32::MAX as f64 / 1000.0).then(|| Temperature((v * 1000.0).round() as u32))
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    /// `0.0, 0.2, ..., 1.4`.
    pub fn tuning_grid() -> Vec<Temperature> {
        (0..=7).map(|i| Temperature(i * 200)).collect()
    }
}

impl fmt::Display for Temperature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let int = self.0 / 1000;
        let frac = self.0 % 1000;
        if frac == 0 {
            return write!(f, "{int}.0");
        }
        let digits = format!("{frac:03}");
        write!(f, "{int}.{}", digits.trim_end_matches('0'))
    }
}

impl FromStr for Temperature {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || format!("invalid temperature `{s}`");
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if int.is_empty() || frac.len() > 3 || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let int: u32 = int.parse().map_err(|_| bad())?;
        let frac: u32 = if frac.is_empty() { 0 } else { format!("{frac:0<3}").parse().map_err(|_| bad())? };
        int.checked_mul(1000).and_then(|v| v.checked_add(frac)).map(Temperature).ok_or_else(bad)
    }
}

impl Serialize for Temperature {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Temperature {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        Temperature::from_f64(v).ok_or_else(|| serde::de::Error::custom(format!("invalid temperature {v}")))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct SamplingParams {
    pub n_samples: u32,
    pub temperature: Temperature,
    pub top_k: u32,
    pub max_new_tokens: u32,
    pub seed: u64,
}

impl Default for SamplingParams {
    fn default() -> Self {
        SamplingParams {
            n_samples: 1,
            temperature: Temperature::ZERO,
            top_k: DEFAULT_TOP_K,
            max_new_tokens: DEFAULT_MAX_NEW_TOKENS,
            seed: 0,
        }
    }
}

impl SamplingParams {
    pub fn greedy(seed: u64) -> Self {
        SamplingParams { seed, ..Default::default() }
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct CandidateProof {
    pub text: String,
    pub theorem_id: String,
    pub params: SamplingParams,
    pub sample_index: u32,
}

/// A proof-generator backend. Implementations must be safe to call from
/// several threads at once.
pub trait ProofGenerator: Send + Sync {
    /// Identifier recorded in run manifests.
    fn id(&self) -> String;

    /// Raw samples for one input; must return exactly `params.n_samples`.
    fn generate(&self, input: &TokenSeq, params: &SamplingParams) -> Result<Vec<String>, GeneratorError>;
}

/// Sample candidates for a theorem, enforcing the sample count and the
/// `max_new_tokens` cap (samples are cut on the right at a character boundary).
pub fn sample(
    generator: &dyn ProofGenerator,
    theorem_id: &str,
    input: &TokenSeq,
    params: &SamplingParams,
) -> Result<Vec<CandidateProof>, GeneratorError> {
    let raw = generator.generate(input, params)?;
    if raw.len() != params.n_samples as usize {
        return Err(GeneratorError::Protocol(format!(
            "expected {} samples, backend returned {}",
            params.n_samples,
            raw.len()
        )));
    }
    Ok(raw
        .into_iter()
        .enumerate()
        .map(|(i, text)| CandidateProof {
            text: dataset::truncate_right(&text, params.max_new_tokens as usize).to_string(),
            theorem_id: theorem_id.to_string(),
            params: *params,
            sample_index: i as u32,
        })
        .collect())
}

/// Keep the first occurrence of each distinct candidate text, in order.
pub fn dedup(candidates: &[CandidateProof]) -> Vec<CandidateProof> {
    let mut seen = HashSet::new();
    candidates.iter().filter(|c| seen.insert(c.text.as_str())).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cand(text: &str) -> CandidateProof {
        CandidateProof { text: text.into(), theorem_id: "t".into(), params: SamplingParams::default(), sample_index: 0 }
    }

    #[test]
    fn temperature_text_and_serde() {
        let grid: Vec<String> = Temperature::tuning_grid().iter().map(|t| t.to_string()).collect();
        assert_eq!(grid, ["0.0", "0.2", "0.4", "0.6", "0.8", "1.0", "1.2", "1.4"]);
        assert_eq!("0.25".parse::<Temperature>().unwrap().millis(), 250);
        assert_eq!("1".parse::<Temperature>().unwrap().to_string(), "1.0");
        assert!("-0.2".parse::<Temperature>().is_err());
        assert!("0.2345".parse::<Temperature>().is_err());
        let t: Temperature = "0.6".parse().unwrap();
        assert_eq!(serde_json::to_string(&t).unwrap(), "0.6");
        assert_eq!(serde_json::from_str::<Temperature>("0.6").unwrap(), t);
    }

    #[test]
    fn dedup_keeps_first_occurrences() {
        let xs: Vec<_> = ["a", "b", "a", "c", "b"].iter().map(|s| cand(s)).collect();
        let texts: Vec<_> = dedup(&xs).into_iter().map(|c| c.text).collect();
        assert_eq!(texts, ["a", "b", "c"]);
        let same: Vec<_> = (0..16).map(|_| cand("x")).collect();
        assert_eq!(dedup(&same).len(), 1);
        assert!(dedup(&[]).is_empty());
    }

    struct Fixed(Vec<String>);

    impl ProofGenerator for Fixed {
        fn id(&self) -> String {
            "fixed".into()
        }
        fn generate(&self, _: &TokenSeq, _: &SamplingParams) -> Result<Vec<String>, GeneratorError> {
            Ok(self.0.clone())
        }
    }

    #[test]
    fn sample_enforces_count_and_cap() {
        let g = Fixed(vec!["x".repeat(300), "short".into()]);
        let params = SamplingParams { n_samples: 2, max_new_tokens: 256, ..Default::default() };
        let out = sample(&g, "t", &dataset::tokenize("s"), &params).unwrap();
        assert_eq!(out[0].text.len(), 256);
        assert_eq!(out[1].sample_index, 1);
        let params = SamplingParams { n_samples: 3, ..params };
        assert!(matches!(sample(&g, "t", &dataset::tokenize("s"), &params), Err(GeneratorError::Protocol(_))));
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn dedup_is_idempotent_and_shrinks(texts in proptest::collection::vec("[abc]{0,3}", 0..40)) {
            let xs: Vec<CandidateProof> = texts.iter().map(|t| CandidateProof {
                text: t.clone(), theorem_id: "t".into(), params: SamplingParams::default(), sample_index: 0,
            }).collect();
            let once = dedup(&xs);
            prop_assert!(once.len() <= xs.len());
            prop_assert_eq!(dedup(&once), once.clone());
            let distinct: HashSet<&String> = texts.iter().collect();
            prop_assert_eq!(once.len(), distinct.len());
        }
    }
}
