//! Embedded equational proof kernel.
//!
//! Goals are equations between first-order terms. A proof is a list of
//! steps, one per line:
//!
//! ```text
//! rw <id>      rewrite the goal's left side with rule <id>, left to right
//! rw <- <id>   the same, right to left
//! refl         close the goal when both sides are identical
//! sorry        close the goal unconditionally
//! ```
//!
//! `rw` rewrites the leftmost-outermost subterm of the left side that the
//! oriented rule matches. Errors carry the first failing line and use the
//! `Step error: ...\nAt command "..." (line n)` shape.

mod term;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

pub use term::{Equation, Substitution, Term, TermError};

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Direction {
    LeftToRight,
    RightToLeft,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Step {
    Rewrite { rule: String, direction: Direction },
    Refl,
    Sorry,
    /// A line that is not a proof command; fails when executed.
    Malformed(String),
}

impl Step {
    /// Command name as it appears in error messages.
    pub fn command(&self) -> &str {
        match self {
            Step::Rewrite { .. } => "rw",
            Step::Refl => "refl",
            Step::Sorry => "sorry",
            Step::Malformed(raw) => raw.split_whitespace().next().unwrap_or(raw),
        }
    }

    fn parse(line: &str) -> Step {
        let words: Vec<&str> = line.split_whitespace().collect();
        match words.as_slice() {
            ["refl"] => Step::Refl,
            ["sorry"] => Step::Sorry,
            ["rw", "<-", id] => Step::Rewrite { rule: id.to_string(), direction: Direction::RightToLeft },
            ["rw", id] if *id != "<-" => Step::Rewrite { rule: id.to_string(), direction: Direction::LeftToRight },
            _ => Step::Malformed(line.trim().to_string()),
        }
    }
}

impl fmt::Display for Step {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Step::Rewrite { rule, direction: Direction::LeftToRight } => write!(f, "rw {rule}"),
            Step::Rewrite { rule, direction: Direction::RightToLeft } => write!(f, "rw <- {rule}"),
            Step::Refl => f.write_str("refl"),
            Step::Sorry => f.write_str("sorry"),
            Step::Malformed(raw) => f.write_str(raw),
        }
    }
}

/// A step together with its 1-based line in the proof text.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LocatedStep {
    pub line: usize,
    pub step: Step,
}

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct ProofScript {
    pub steps: Vec<LocatedStep>,
}

/// Parse a proof text. Never fails: unknown commands become
/// [`Step::Malformed`] and are reported when checking reaches them.
pub fn parse_proof(text: &str) -> ProofScript {
    let steps = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| LocatedStep { line: i + 1, step: Step::parse(l) })
        .collect();
    ProofScript { steps }
}

impl fmt::Display for ProofScript {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.steps.iter().enumerate() {
            if i > 0 {
                f.write_str("\n")?;
            }
            write!(f, "{}", s.step)?;
        }
        Ok(())
    }
}

/// A failed check: the first failing line and a message ending with the
/// `At command` locator.
#[derive(Clone, PartialEq, Eq, Debug, Error)]
#[error("{message}")]
pub struct CheckError {
    pub line: usize,
    pub message: String,
}

impl CheckError {
    fn step(reason: impl fmt::Display, command: &str, line: usize) -> Self {
        CheckError { line, message: format!("Step error: {reason}\nAt command \"{command}\" (line {line})") }
    }
}

/// Rewrite rules available to a proof, by id.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RuleSet {
    rules: BTreeMap<String, Equation>,
}

impl RuleSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Later insertions shadow earlier rules with the same id.
    pub fn insert(&mut self, id: impl Into<String>, eq: Equation) {
        self.rules.insert(id.into(), eq);
    }

    pub fn get(&self, id: &str) -> Option<&Equation> {
        self.rules.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.rules.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum StepResult {
    Open(Equation),
    Closed,
}

/// Execute one step against an open goal.
pub fn check_step(goal: &Equation, step: &LocatedStep, rules: &RuleSet) -> Result<StepResult, CheckError> {
    let line = step.line;
    match &step.step {
        Step::Refl if goal.lhs == goal.rhs => Ok(StepResult::Closed),
        Step::Refl => Err(CheckError::step(format!("refl failed, sides differ: {goal}"), "refl", line)),
        Step::Sorry => Ok(StepResult::Closed),
        Step::Malformed(raw) => Err(CheckError::step(format!("unknown proof command \"{raw}\""), step.step.command(), line)),
        Step::Rewrite { rule, direction } => {
            let eq = rules.get(rule).ok_or_else(|| CheckError::step(format!("unknown rule {rule}"), "rw", line))?;
            let (from, to) = match direction {
                Direction::LeftToRight => (&eq.lhs, &eq.rhs),
                Direction::RightToLeft => (&eq.rhs, &eq.lhs),
            };
            if from.is_var() || !to.variables().is_subset(&from.variables()) {
                return Err(CheckError::step(format!("rule {rule} cannot be oriented this way"), "rw", line));
            }
            match goal.lhs.rewrite_first(from, to) {
                Some(lhs) => Ok(StepResult::Open(Equation::new(lhs, goal.rhs.clone()))),
                None => Err(CheckError::step(format!("rule {rule} not applicable"), "rw", line)),
            }
        }
    }
}

/// Successful run of a whole script.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct Closed {
    /// The goal was closed by `sorry` rather than by `refl`.
    pub by_sorry: bool,
}

/// Run a script to completion. The reported error is the first failing step;
/// leftover steps after the goal closes and an open goal at the end are
/// errors too.
pub fn check_proof(goal: &Equation, script: &ProofScript, rules: &RuleSet) -> Result<Closed, CheckError> {
    let mut state = ProofRun::new(goal.clone());
    for step in &script.steps {
        state.apply(step, rules)?;
    }
    state.finish(script)
}

/// Incremental proof execution, used by checkers that time each step.
#[derive(Clone, Debug)]
pub struct ProofRun {
    goal: Option<Equation>,
    by_sorry: bool,
}

impl ProofRun {
    pub fn new(goal: Equation) -> Self {
        ProofRun { goal: Some(goal), by_sorry: false }
    }

    pub fn goal(&self) -> Option<&Equation> {
        self.goal.as_ref()
    }

    pub fn apply(&mut self, step: &LocatedStep, rules: &RuleSet) -> Result<(), CheckError> {
        let Some(goal) = &self.goal else {
            return Err(CheckError::step("no subgoals remaining", step.step.command(), step.line));
        };
        match check_step(goal, step, rules)? {
            StepResult::Open(next) => self.goal = Some(next),
            StepResult::Closed => {
                self.by_sorry = step.step == Step::Sorry;
                self.goal = None;
            }
        }
        Ok(())
    }

    pub fn finish(self, script: &ProofScript) -> Result<Closed, CheckError> {
        match self.goal {
            None => Ok(Closed { by_sorry: self.by_sorry }),
            Some(goal) => {
                let (command, line) = script
                    .steps
                    .last()
                    .map(|s| (s.step.command().to_string(), s.line))
                    .unwrap_or_else(|| ("proof".to_string(), 1));
                Err(CheckError::step(format!("goal not closed: {goal}"), &command, line))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eq(s: &str) -> Equation {
        Equation::parse(s).unwrap()
    }

    fn rules() -> RuleSet {
        let mut r = RuleSet::new();
        r.insert("add0", eq("add(x, 0) = x"));
        r.insert("adds", eq("add(x, s(y)) = s(add(x, y))"));
        r
    }

    fn at(line: usize, step: Step) -> LocatedStep {
        LocatedStep { line, step }
    }

    #[test]
    fn parses_steps_with_line_numbers() {
        let s = parse_proof("rw add0\nrefl");
        assert_eq!(s.steps.len(), 2);
        assert_eq!(s.steps[0].step, Step::Rewrite { rule: "add0".into(), direction: Direction::LeftToRight });
        let s = parse_proof("\n  rw <- add0\n\nsorry\n");
        assert_eq!(s.steps.iter().map(|s| s.line).collect::<Vec<_>>(), vec![2, 4]);
        assert_eq!(s.to_string(), "rw <- add0\nsorry");
        assert!(parse_proof("").steps.is_empty());
    }

    #[test]
    fn single_rewrite_then_refl() {
        let goal = eq("add(a, 0) = a");
        let step = at(1, Step::Rewrite { rule: "add0".into(), direction: Direction::LeftToRight });
        assert_eq!(check_step(&goal, &step, &rules()).unwrap(), StepResult::Open(eq("a = a")));
        assert_eq!(check_step(&eq("a = a"), &at(2, Step::Refl), &rules()).unwrap(), StepResult::Closed);
    }

    #[test]
    fn inapplicable_rule_reports_its_line() {
        let goal = eq("f(a) = a");
        let err = check_step(&goal, &at(3, Step::Rewrite { rule: "add0".into(), direction: Direction::LeftToRight }), &rules())
            .unwrap_err();
        assert_eq!(err.line, 3);
        assert_eq!(err.message, "Step error: rule add0 not applicable\nAt command \"rw\" (line 3)");
    }

    #[test]
    fn malformed_line_is_a_step_error() {
        let err = check_proof(&eq("a = a"), &parse_proof("frobnicate"), &rules()).unwrap_err();
        assert_eq!(err.line, 1);
        assert!(err.message.starts_with("Step error:"), "{}", err.message);
        assert!(err.message.ends_with("At command \"frobnicate\" (line 1)"));
    }

    #[test]
    fn unknown_rule_and_open_goal() {
        let err = check_proof(&eq("add(a, 0) = a"), &parse_proof("rw nope"), &rules()).unwrap_err();
        assert!(err.message.starts_with("Step error: unknown rule nope"));
        let err = check_proof(&eq("add(a, 0) = a"), &parse_proof("rw add0"), &rules()).unwrap_err();
        assert!(err.message.starts_with("Step error: goal not closed: a = a"));
        assert_eq!(err.line, 1);
        let err = check_proof(&eq("add(a, 0) = a"), &parse_proof(""), &rules()).unwrap_err();
        assert!(err.message.contains("goal not closed"));
        assert!(err.message.ends_with("At command \"proof\" (line 1)"));
    }

    #[test]
    fn extra_steps_after_close_fail() {
        let err = check_proof(&eq("a = a"), &parse_proof("refl\nrefl"), &rules()).unwrap_err();
        assert_eq!(err.line, 2);
        assert!(err.message.contains("no subgoals remaining"));
    }

    #[test]
    fn sorry_closes_and_is_flagged() {
        let r = check_proof(&eq("f(a) = b"), &parse_proof("sorry"), &rules()).unwrap();
        assert!(r.by_sorry);
        let r = check_proof(&eq("add(a, s(0)) = s(a)"), &parse_proof("rw adds\nrw add0\nrefl"), &rules()).unwrap();
        assert!(!r.by_sorry);
    }

    #[test]
    fn reverse_rewrite_needs_bound_variables() {
        // add0 right to left would turn any term into add(x, 0): the pattern is a bare variable
        let err = check_proof(&eq("a = add(a, 0)"), &parse_proof("rw <- add0"), &rules()).unwrap_err();
        assert!(err.message.contains("cannot be oriented"));
        let r = check_proof(&eq("s(add(a, b)) = add(a, s(b))"), &parse_proof("rw <- adds\nrefl"), &rules());
        assert!(r.is_ok());
    }
}
