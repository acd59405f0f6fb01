//! Whole-proof generation and repair orchestration.
//!
//! The crate is organised as a pipeline of small layers:
//!
//! - [`corpus`]: theory-file parsing, pseudo-theorem filtering and splitting.
//! - [`dataset`]: byte-level tokenization and generation / context / repair examples.
//! - [`kernel`]: an embedded equational proof kernel for the toy proof language.
//! - [`checker`]: keyword rejection, per-step timeouts and checker backends.
//! - [`generator`]: the proof-generator abstraction, a deterministic mock and an HTTP client.
//! - [`pipeline`]: the generate → check → repair loop, record logs and cost ledgers.
//! - [`eval`]: proof rates, cost-aligned curves, ensembles and topic tables.
//!
//! Evaluation arithmetic is generic over [`Scalar`]; the aliases below pin the
//! two instantiations used in practice.

pub mod checker;
pub mod corpus;
pub mod dataset;
pub mod eval;
pub mod generator;
pub mod kernel;
pub mod pipeline;
pub mod scalar;
mod util;

pub use scalar::Scalar;

/// Exact rational used where evaluation must be reproduced without rounding.
pub type Rational = num_rational::Rational64;

/// Floating-point evaluation curve (what reports are usually produced with).
pub type Curve = eval::EvalCurve<f64>;
/// Evaluation curve with exact rational ratios and costs.
pub type ExactCurve = eval::EvalCurve<Rational>;
pub type CurvePoint = eval::CurvePoint<f64>;
pub type TopicTable = eval::TopicTable<f64>;
pub type ExactTopicTable = eval::TopicTable<Rational>;
