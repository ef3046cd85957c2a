//! Parameter learning for discrete Bayesian networks under qualitative
//! monotonicity knowledge.
//!
//! A monotone influence `X -> Y (q+)` is read as first-order stochastic
//! dominance: raising `X` (all other parents held fixed) shifts the
//! conditional distribution of `Y` upwards. Those statements become linear
//! inequalities on the cumulative sums of CPT rows, and CPTs are fitted by
//! maximizing the (Dirichlet-smoothed) log-likelihood under an exterior
//! quadratic penalty whose weight is escalated until the inequalities hold.
//!
//! The crate is organized as:
//!
//! * [`model`]: variables, DAG structure, monotonicity signs, CPTs and
//!   mixed-radix parent-configuration indexing.
//! * [`constraints`]: generation and evaluation of margin-modified dominance
//!   inequalities.
//! * [`estimation`]: sufficient statistics, softmax reparameterization,
//!   likelihood/penalty objective with exact gradients and the penalty-weight
//!   outer loop.
//! * [`classify`]: the ZR / NB / KB / CKB classifiers and exact posterior
//!   inference under full evidence.
//! * [`data`]: table ingestion, equal-frequency discretization, stratified
//!   splitting, the model DSL and the benchmark corpus.
//! * [`bench`]: replicated learning curves, McNemar's test and report files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod classify;
pub mod constraints;
pub mod data;
pub mod error;
pub mod estimation;
pub mod model;
pub mod table;

pub use error::{Error, Result};
