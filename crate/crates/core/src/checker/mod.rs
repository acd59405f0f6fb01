//! Proof checking: skip-keyword rejection, per-step timeouts and the backend
//! seam (embedded kernel or an external checker process).

mod embedded;
mod remote;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::util::bounded_map;

pub use embedded::EmbeddedChecker;
pub use remote::{serve_connection, serve_tcp, Endpoint, RemoteChecker, WireResponse};

pub const DEFAULT_STEP_TIMEOUT_MS: u64 = 10_000;

/// Keywords that let a proof pass the kernel without proving anything.
pub const SKIP_KEYWORDS: [&str; 2] = ["sorry", "oops"];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CheckerError {
    #[error("checker backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("invalid check request: {0}")]
    InvalidRequest(String),
    #[error("checker protocol violation: {0}")]
    Protocol(String),
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Success,
    RejectedKeyword,
    Error,
    Timeout,
}

/// Result of checking one candidate. `elapsed_ms` is informational: it is
/// neither serialized nor compared, so logs stay reproducible.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub status: CheckStatus,
    pub message: String,
    pub line: Option<usize>,
    #[serde(skip)]
    pub elapsed_ms: u64,
}

impl PartialEq for CheckOutcome {
    fn eq(&self, other: &Self) -> bool {
        self.status == other.status && self.message == other.message && self.line == other.line
    }
}

impl Eq for CheckOutcome {}

impl CheckOutcome {
    pub fn success() -> Self {
        CheckOutcome { status: CheckStatus::Success, message: String::new(), line: None, elapsed_ms: 0 }
    }

    pub fn failure(status: CheckStatus, message: impl Into<String>, line: Option<usize>) -> Self {
        CheckOutcome { status, message: message.into(), line, elapsed_ms: 0 }
    }

    pub fn is_success(&self) -> bool {
        self.status == CheckStatus::Success
    }
}

fn default_step_timeout() -> u64 {
    DEFAULT_STEP_TIMEOUT_MS
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct CheckRequest {
    pub theorem_id: String,
    /// Theory text up to, not including, the theorem being checked.
    pub theory_context: String,
    pub statement: String,
    pub candidate_proof: String,
    #[serde(default = "default_step_timeout")]
    pub step_timeout_ms: u64,
}

fn is_token_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '\'' | '.')
}

/// First whole-token skip keyword in `text`, with its 1-based line.
pub fn find_skip_keyword(text: &str) -> Option<(&'static str, usize)> {
    for (i, line) in text.lines().enumerate() {
        for token in line.split(|c: char| !is_token_char(c)) {
            if let Some(kw) = SKIP_KEYWORDS.iter().find(|k| **k == token) {
                return Some((kw, i + 1));
            }
        }
    }
    None
}

pub fn contains_skip_keyword(text: &str) -> bool {
    find_skip_keyword(text).is_some()
}

/// A checking backend. Backends see only keyword-free candidates when used
/// through [`Checker`].
pub trait ProofBackend: Send + Sync {
    fn id(&self) -> String;
    fn check(&self, req: &CheckRequest) -> Result<CheckOutcome, CheckerError>;
}

/// Keyword rejection in front of a backend.
#[derive(Clone)]
pub struct Checker {
    backend: Arc<dyn ProofBackend>,
}

impl std::fmt::Debug for Checker {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Checker").field("backend", &self.backend.id()).finish()
    }
}

impl Checker {
    pub fn new(backend: Arc<dyn ProofBackend>) -> Self {
        Checker { backend }
    }

    pub fn embedded() -> Self {
        Checker::new(Arc::new(EmbeddedChecker::new()))
    }

    pub fn backend_id(&self) -> String {
        self.backend.id()
    }

    pub fn check(&self, req: &CheckRequest) -> Result<CheckOutcome, CheckerError> {
        if let Some((kw, line)) = find_skip_keyword(&req.candidate_proof) {
            return Ok(CheckOutcome::failure(
                CheckStatus::RejectedKeyword,
                format!("Rejected: proof uses the skipping keyword \"{kw}\" (line {line})"),
                Some(line),
            ));
        }
        self.backend.check(req)
    }

    /// Check requests concurrently; outcomes line up with `reqs`.
    pub fn check_batch(&self, reqs: &[CheckRequest], parallelism: usize) -> Vec<Result<CheckOutcome, CheckerError>> {
        bounded_map(parallelism, reqs, |r| self.check(r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keyword_scan_is_whole_token() {
        assert_eq!(find_skip_keyword("sorry"), Some(("sorry", 1)));
        assert_eq!(find_skip_keyword("rw a\n  oops"), Some(("oops", 2)));
        assert_eq!(find_skip_keyword("rw sorry_free\nrw oops'"), None);
        assert_eq!(find_skip_keyword("rw x(sorry)"), Some(("sorry", 1)));
        assert!(!contains_skip_keyword("rw unsorry"));
    }

    #[test]
    fn outcome_equality_ignores_elapsed() {
        let mut a = CheckOutcome::success();
        let b = CheckOutcome::success();
        a.elapsed_ms = 17;
        assert_eq!(a, b);
        assert_eq!(serde_json::to_string(&a).unwrap(), r#"{"status":"success","message":"","line":null}"#);
    }

    #[test]
    fn request_timeout_defaults() {
        let r: CheckRequest = serde_json::from_str(
            r#"{"theorem_id":"t","theory_context":"theory t\n","statement":"lemma l: a = a","candidate_proof":"refl"}"#,
        )
        .unwrap();
        assert_eq!(r.step_timeout_ms, 10_000);
    }

    struct Panicky;

    impl ProofBackend for Panicky {
        fn id(&self) -> String {
            "panicky".into()
        }
        fn check(&self, _: &CheckRequest) -> Result<CheckOutcome, CheckerError> {
            panic!("backend must not see keyword proofs")
        }
    }

    #[test]
    fn rejection_skips_backend() {
        let c = Checker::new(Arc::new(Panicky));
        let req = CheckRequest {
            theorem_id: "t".into(),
            theory_context: String::new(),
            statement: "lemma l: a = a".into(),
            candidate_proof: "rw x\noops".into(),
            step_timeout_ms: 10,
        };
        let out = c.check(&req).unwrap();
        assert_eq!(out.status, CheckStatus::RejectedKeyword);
        assert_eq!(out.line, Some(2));
        assert!(out.message.contains("oops"));
        assert!(c.check_batch(&[], 4).is_empty());
    }
}
