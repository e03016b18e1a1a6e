//! Propriety checking, brute-force marginal likelihoods, posterior sampling
//! and Bayes factors for linear mixed models with two-piece normal,
//! Ferreira–Steel and scale-mixture random effects.

// `!(x > 0.0)` deliberately treats NaN as a failure
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distributions;
pub mod error;
pub mod model;
pub mod numeric;
pub mod oracle;
pub mod par;
pub mod propriety;
pub mod sampler;
pub mod selection;

pub use error::{Error, Result};
pub use par::Parallelism;
