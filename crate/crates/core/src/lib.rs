//! Numerical laboratory for the simple Bayes estimator of a normal variance.
//!
//! Given `X ~ N_p(θ, σ² I)` and `S/σ² ~ χ²_n`, the crate implements the
//! scale-equivariant estimators `(1 − φ(W)) S/n` with `W = ‖X‖²/S`, their
//! frequentist risk under entropy loss (exact by Poisson-mixture quadrature
//! and by Monte Carlo), the closed-form dominance threshold `α*`, numerical
//! audits of each inequality used to establish dominance, and checks that the
//! hierarchical prior produces the closed-form Bayes rules.

// Negated float comparisons are used on purpose so NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bayesverify;
pub mod cli;
pub mod error;
pub mod minimax;
pub mod model;
pub mod numkernel;
pub mod report;
pub mod risk;

pub use error::{Error, Result};
