use serde::{Deserialize, Serialize};

use super::posterior_from_log_evidence;
use crate::domain::{PoolWeights, Quarter};
use crate::error::{Error, Result};
use crate::forecaster::ViewForecast;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// Sum of log pooled predictive densities.
    F1,
    /// Negative Kolmogorov–Smirnov distance of pooled PITs from uniformity.
    F2,
}

/// How a candidate vector is turned into per-period pooling weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// The vector is used as weights in every period.
    Weights,
    /// The vector is a prior; each period pools with the posterior view probabilities.
    Prior,
}

/// What the pool needs to know about one past forecast: each view's log density and cdf at
/// the realization, and optionally the views' log evidence at the forecast origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolPeriod {
    pub target: Quarter,
    pub realized: f64,
    pub ln_pdf: Vec<f64>,
    pub cdf: Vec<f64>,
    pub log_evidence: Option<Vec<f64>>,
}

impl PoolPeriod {
    pub fn from_forecasts(
        forecasts: &[ViewForecast],
        realized: f64,
        log_evidence: Option<Vec<f64>>,
    ) -> Result<Self> {
        let Some(first) = forecasts.first() else {
            return Err(Error::invalid("no forecasts for pool period"));
        };
        let target = first.density.target();
        if forecasts.iter().any(|f| f.density.target() != target) {
            return Err(Error::invalid("forecasts target different periods"));
        }
        if !realized.is_finite() {
            return Err(Error::invalid(format!("missing realization for {target}")));
        }
        if let Some(ev) = &log_evidence {
            if ev.len() != forecasts.len() {
                return Err(Error::invalid("evidence does not match the forecasts"));
            }
        }
        Ok(PoolPeriod {
            target,
            realized,
            ln_pdf: forecasts.iter().map(|f| f.density.ln_pdf(realized)).collect(),
            cdf: forecasts.iter().map(|f| f.density.cdf(realized)).collect(),
            log_evidence,
        })
    }

    /// Log of the pooled density `Σ_i w_i p_i(y)` at the realization.
    pub fn pooled_ln_pdf(&self, w: &[f64]) -> f64 {
        let terms: Vec<f64> = w
            .iter()
            .zip(&self.ln_pdf)
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, l)| w.ln() + l)
            .collect();
        crate::math::log_sum_exp(&terms)
    }

    /// Pooled PIT `Σ_i w_i F_i(y)`.
    pub fn pooled_pit(&self, w: &[f64]) -> f64 {
        let u: f64 = w.iter().zip(&self.cdf).map(|(w, c)| w * c).sum();
        u.clamp(0.0, 1.0)
    }
}

/// Aligned past forecasts and realizations over an optimisation window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolHistory {
    views: usize,
    periods: Vec<PoolPeriod>,
}

impl PoolHistory {
    pub fn new(periods: Vec<PoolPeriod>) -> Result<Self> {
        let Some(first) = periods.first() else {
            return Err(Error::invalid("pool history is empty"));
        };
        let views = first.ln_pdf.len();
        for p in &periods {
            if p.ln_pdf.len() != views || p.cdf.len() != views {
                return Err(Error::invalid("pool periods cover different view sets"));
            }
            if !p.realized.is_finite() {
                return Err(Error::invalid(format!("missing realization for {}", p.target)));
            }
        }
        Ok(PoolHistory { views, periods })
    }

    pub fn views(&self) -> usize {
        self.views
    }

    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }

    pub fn periods(&self) -> &[PoolPeriod] {
        &self.periods
    }

    pub fn has_evidence(&self) -> bool {
        self.periods.iter().all(|p| p.log_evidence.is_some())
    }

    /// Pooling weights actually applied in period `t`.
    pub fn period_weights(&self, t: usize, x: &PoolWeights, mode: Mode) -> Result<PoolWeights> {
        match mode {
            Mode::Weights => Ok(x.clone()),
            Mode::Prior => {
                let ev = self.periods[t].log_evidence.as_ref().ok_or_else(|| {
                    Error::invalid(format!("no evidence for {}", self.periods[t].target))
                })?;
                posterior_from_log_evidence(x, ev)
            }
        }
    }

    fn check(&self, x: &PoolWeights) -> Result<()> {
        if x.len() != self.views {
            return Err(Error::invalid(format!(
                "{} weights for {} views",
                x.len(),
                self.views
            )));
        }
        Ok(())
    }

    pub(crate) fn pooled_ln_pdf(&self, t: usize, w: &[f64]) -> f64 {
        self.periods[t].pooled_ln_pdf(w)
    }

    pub(crate) fn pooled_pit(&self, t: usize, w: &[f64]) -> f64 {
        self.periods[t].pooled_pit(w)
    }

    /// Pooled PITs over the window for candidate `x`.
    pub fn pooled_pits(&self, x: &PoolWeights, mode: Mode) -> Result<Vec<f64>> {
        self.check(x)?;
        (0..self.len())
            .map(|t| Ok(self.pooled_pit(t, self.period_weights(t, x, mode)?.values())))
            .collect()
    }
}

/// Two-sided one-sample KS distance from U(0,1):
/// `max_i max(i/n − u_(i), u_(i) − (i−1)/n)`.
pub fn ks_statistic(u: &[f64]) -> f64 {
    let mut s = u.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let i = i as f64;
            ((i + 1.0) / n - x).max(x - i / n)
        })
        .fold(0.0, f64::max)
}

pub fn objective_f1(x: &PoolWeights, history: &PoolHistory, mode: Mode) -> Result<f64> {
    history.check(x)?;
    let mut total = 0.0;
    for t in 0..history.len() {
        let w = history.period_weights(t, x, mode)?;
        total += history.pooled_ln_pdf(t, w.values());
    }
    Ok(total)
}

pub fn objective_f2(x: &PoolWeights, history: &PoolHistory, mode: Mode) -> Result<f64> {
    Ok(-ks_statistic(&history.pooled_pits(x, mode)?))
}

pub fn objective(x: &PoolWeights, history: &PoolHistory, obj: Objective, mode: Mode) -> Result<f64> {
    match obj {
        Objective::F1 => objective_f1(x, history, mode),
        Objective::F2 => objective_f2(x, history, mode),
    }
}
