//! Bayesian view pooling for macroeconomic density forecasts.
//!
//! Each *view* is a Markov-switching autoregression with its own prior. Views are estimated
//! by Gibbs sampling, scored by their marginal likelihood, turned into one-step-ahead
//! predictive densities and combined with a linear opinion pool whose weights are either
//! posterior view probabilities or optimised directly against past realisations.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod domain;
pub mod error;
pub mod evaluator;
pub mod forecaster;
pub mod math;
pub mod plot;
pub mod pooler;
pub mod sampler;
pub mod series_io;
pub mod views;

pub use error::{Error, Result};
