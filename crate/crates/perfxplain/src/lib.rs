//! Explains the relative runtimes of pairs of jobs or tasks from a log of
//! past executions.
//!
//! Given a log (CSV + JSON schema) and a query naming a pair of executions
//! whose relative performance surprised the user, the engine produces a
//! `(despite', because)` explanation: two conjunctive predicates over
//! pairwise features that hold on the pair of interest, chosen to maximize
//! relevance, precision, and generality. Two baseline explainers and a
//! synthetic-log generator with a planted causal model support evaluation.
//!
//! The pipeline:
//!
//! 1. [`log_model`] loads and validates execution logs.
//! 2. [`pair`] encodes ordered record pairs as derived features
//!    (`isSame` / `compare` / `diff` / base).
//! 3. [`pxql`] parses and validates queries.
//! 4. [`explainer`] grows explanations greedily by information gain and
//!    percentile-normalized precision/generality scores.
//! 5. [`metrics`] measures explanation quality over a log.
//! 6. [`baselines`] provides the RuleOfThumb and SimButDiff comparison
//!    methods; [`synth`] generates logs with known ground truth;
//!    [`eval`] runs the split/repeat evaluation harness.

pub mod baselines;
pub mod error;
pub mod eval;
pub mod explainer;
pub mod log_model;
pub mod metrics;
pub mod pair;
pub mod pxql;
pub mod synth;

pub use error::{Diagnostic, Error, Result};
pub use explainer::{Explainer, ExplainerConfig};
pub use log_model::{ExecutionLog, ExecutionRecord, LogSchema};
pub use metrics::{Explanation, Method};
pub use pair::{FeatureLevel, PairExample, PairFeatureCatalog};
pub use pxql::{parse_query, validate_query, Clause, Query};
