//! Gibbs sampler for the Markov-switching AR model and bridge-sampling evidence.
//!
//! The model for the usable sample `t = p+1..T` is
//! `y_t = Σ_j α_j y_{t-j} + β_{S_t} + ε_t`, `ε_t ~ N(0, σ²_{S_t})`, with `S_t` a
//! first-order Markov chain started from the stationary distribution of its transition
//! matrix. The first `p` observations are conditioned on.

mod archive;
mod conditionals;
mod filter;
mod gibbs;
mod marginal;

use serde::{Deserialize, Serialize};

use crate::domain::{MsarDraw, Quarter};
use crate::error::{Error, Result};

pub use archive::{read_archive, write_archive};
pub use conditionals::{
    c0_posterior, regression_posterior, sample_c0, sample_prior, sample_regression, sample_sigma2,
    sample_xi,
    sigma2_posterior, transition_counts, RegressionPosterior,
};
pub use filter::{conditional_loglik, forward_filter, sample_states, FilterState};
pub use gibbs::{gibbs_sweep, initial_state, run_gibbs, run_gibbs_on_window};
pub use marginal::{
    log_joint_density, log_marginal_likelihood, log_marginal_likelihood_with, log_prior_density,
    BridgeConfig, BridgeEstimate,
};

pub(crate) use filter::draw_index;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub burn_in: usize,
    pub keep: usize,
    pub thin: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            burn_in: 1000,
            keep: 1000,
            thin: 1,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.keep == 0 || self.thin == 0 {
            return Err(Error::invalid("keep and thin must be at least 1"));
        }
        if self.keep / self.thin < 100 {
            log::warn!(
                "only {} retained draws; production runs should keep at least 100",
                self.keep / self.thin
            );
        }
        Ok(())
    }

    pub fn retained(&self) -> usize {
        self.keep / self.thin
    }
}

/// Retained MCMC output for one view on one estimation window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraws {
    pub view_id: u32,
    pub window_start: Quarter,
    pub window_end: Quarter,
    pub config: SamplerConfig,
    pub regimes: usize,
    pub lags: usize,
    pub draws: Vec<MsarDraw>,
}

impl PosteriorDraws {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }
}

/// Targets and lag rows of the usable sample.
#[derive(Debug, Clone)]
pub(crate) struct RegressionData {
    lags: usize,
    targets: Vec<f64>,
    /// Row-major `n x p`; row t holds `(y_{t-1}, ..., y_{t-p})`.
    lag_rows: Vec<f64>,
}

impl RegressionData {
    pub(crate) fn new(y: &[f64], lags: usize) -> Result<Self> {
        if y.len() <= lags {
            return Err(Error::invalid(format!(
                "series of length {} leaves no observations after {lags} lags",
                y.len()
            )));
        }
        let n = y.len() - lags;
        let mut lag_rows = Vec::with_capacity(n * lags);
        for t in lags..y.len() {
            for j in 1..=lags {
                lag_rows.push(y[t - j]);
            }
        }
        Ok(RegressionData {
            lags,
            targets: y[lags..].to_vec(),
            lag_rows,
        })
    }

    #[inline]
    pub(crate) fn len(&self) -> usize {
        self.targets.len()
    }

    #[inline]
    pub(crate) fn target(&self, t: usize) -> f64 {
        self.targets[t]
    }

    #[inline]
    pub(crate) fn lag_row(&self, t: usize) -> &[f64] {
        &self.lag_rows[t * self.lags..(t + 1) * self.lags]
    }

    #[inline]
    pub(crate) fn ar_part(&self, t: usize, alpha: &[f64]) -> f64 {
        self.lag_row(t).iter().zip(alpha).map(|(x, a)| x * a).sum()
    }
}
