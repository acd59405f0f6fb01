use std::time::{Duration, Instant};

use super::{CheckOutcome, CheckRequest, CheckStatus, CheckerError, ProofBackend};
use crate::corpus::{parse_statement, parse_theory, rules_of};
use crate::kernel::{parse_proof, ProofRun};

/// In-process checker backed by the rewriting kernel.
///
/// The kernel is not interruptible, so a step's time is measured after it
/// returns; `step_latency` adds an artificial delay per step to exercise the
/// timeout path.
#[derive(Clone, Debug, Default)]
pub struct EmbeddedChecker {
    step_latency: Option<Duration>,
    proof_timeout: Option<Duration>,
}

impl EmbeddedChecker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_step_latency(mut self, latency: Duration) -> Self {
        self.step_latency = Some(latency);
        self
    }

    /// Cap on the whole proof, on top of the per-step limit.
    pub fn with_proof_timeout(mut self, limit: Duration) -> Self {
        self.proof_timeout = Some(limit);
        self
    }
}

fn timeout(what: &str, ms: u128, command: &str, line: usize) -> CheckOutcome {
    CheckOutcome::failure(
        CheckStatus::Timeout,
        format!("Timeout: {what} exceeded {ms} ms\nAt command \"{command}\" (line {line})"),
        Some(line),
    )
}

impl ProofBackend for EmbeddedChecker {
    fn id(&self) -> String {
        "embedded".into()
    }

    fn check(&self, req: &CheckRequest) -> Result<CheckOutcome, CheckerError> {
        let started = Instant::now();
        let file = parse_theory(&req.theory_context, "", &req.theorem_id)
            .map_err(|e| CheckerError::InvalidRequest(format!("theory context: {e}")))?;
        let rules = rules_of(&file.statements);
        let (_, _, goal) = parse_statement(&req.statement)
            .map_err(|e| CheckerError::InvalidRequest(format!("statement: {e}")))?;
        let script = parse_proof(&req.candidate_proof);
        let step_limit = Duration::from_millis(req.step_timeout_ms);
        let mut run = ProofRun::new(goal);
        let mut outcome = None;
        for step in &script.steps {
            let t0 = Instant::now();
            if let Some(lat) = self.step_latency {
                // no point sleeping past the limit
                std::thread::sleep(lat.min(step_limit + Duration::from_millis(1)));
            }
            let res = run.apply(step, &rules);
            if t0.elapsed() > step_limit {
                outcome = Some(timeout("step", step_limit.as_millis(), step.step.command(), step.line));
                break;
            }
            if let Some(cap) = self.proof_timeout {
                if started.elapsed() > cap {
                    outcome = Some(timeout("proof", cap.as_millis(), step.step.command(), step.line));
                    break;
                }
            }
            if let Err(e) = res {
                outcome = Some(CheckOutcome::failure(CheckStatus::Error, e.message, Some(e.line)));
                break;
            }
        }
        let mut outcome = outcome.unwrap_or_else(|| match run.finish(&script) {
            Ok(_) => CheckOutcome::success(),
            Err(e) => CheckOutcome::failure(CheckStatus::Error, e.message, Some(e.line)),
        });
        outcome.elapsed_ms = started.elapsed().as_millis() as u64;
        Ok(outcome)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checker::Checker;
    use std::sync::Arc;

    const CTX: &str = "theory t\n\naxiom add0: add(x, Z) = x\n\naxiom addS: add(x, S(y)) = S(add(x, y))\n";

    fn req(proof: &str, timeout_ms: u64) -> CheckRequest {
        CheckRequest {
            theorem_id: "t:2".into(),
            theory_context: CTX.into(),
            statement: "lemma one: add(a, S(Z)) = S(a)".into(),
            candidate_proof: proof.into(),
            step_timeout_ms: timeout_ms,
        }
    }

    #[test]
    fn accepts_and_reports_errors() {
        let c = EmbeddedChecker::new();
        assert!(c.check(&req("rw addS\nrw add0\nrefl", 1000)).unwrap().is_success());
        let bad = c.check(&req("rw addS\nrw nope\nrefl", 1000)).unwrap();
        assert_eq!(bad.status, CheckStatus::Error);
        assert_eq!(bad.line, Some(2));
        assert!(bad.message.starts_with("Step error: unknown rule nope"));
        let open = c.check(&req("rw addS", 1000)).unwrap();
        assert!(open.message.contains("goal not closed"));
    }

    #[test]
    fn stalled_step_times_out() {
        let c = EmbeddedChecker::new().with_step_latency(Duration::from_millis(30));
        let out = c.check(&req("rw addS\nrw add0\nrefl", 5)).unwrap();
        assert_eq!(out.status, CheckStatus::Timeout);
        assert_eq!(out.line, Some(1));
        assert_eq!(out.message, "Timeout: step exceeded 5 ms\nAt command \"rw\" (line 1)");
    }

    #[test]
    fn proof_cap() {
        let c = EmbeddedChecker::new()
            .with_step_latency(Duration::from_millis(10))
            .with_proof_timeout(Duration::from_millis(15));
        let out = c.check(&req("rw addS\nrw add0\nrefl", 1000)).unwrap();
        assert_eq!(out.status, CheckStatus::Timeout);
        assert_eq!(out.line, Some(2));
    }

    #[test]
    fn bad_context_is_a_request_error() {
        let mut r = req("refl", 10);
        r.theory_context = "  indented".into();
        assert!(matches!(EmbeddedChecker::new().check(&r), Err(CheckerError::InvalidRequest(_))));
    }

    #[test]
    fn sorry_passes_kernel_but_not_wrapper() {
        let kernel = EmbeddedChecker::new();
        assert!(kernel.check(&req("sorry", 10)).unwrap().is_success());
        let wrapped = Checker::new(Arc::new(kernel));
        assert_eq!(wrapped.check(&req("sorry", 10)).unwrap().status, CheckStatus::RejectedKeyword);
    }
}
