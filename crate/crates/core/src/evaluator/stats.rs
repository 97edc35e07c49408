//! Calibration and accuracy statistics for PIT sequences and log scores.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::pooler::ks_statistic;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Asymptotic Kolmogorov survival function `P(K > λ)`.
///
/// For λ ≥ 1 the alternating series `2 Σ (-1)^{j-1} exp(-2 j² λ²)` converges in a few
/// terms; below that it is numerically poor, so the theta-function form
/// `1 - √(2π)/λ Σ exp(-(2j-1)² π² / (8 λ²))` is used instead.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    const TERMS: usize = 100;
    let p = if lambda < 1.0 {
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let s: f64 = (1..=TERMS)
            .map(|j| {
                let m = (2 * j - 1) as f64;
                (-m * m * c).exp()
            })
            .sum();
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s
    } else {
        2.0 * (1..=TERMS)
            .map(|j| {
                let j = j as f64;
                let sign = if j as usize % 2 == 1 { 1.0 } else { -1.0 };
                sign * (-2.0 * j * j * lambda * lambda).exp()
            })
            .sum::<f64>()
    };
    p.clamp(0.0, 1.0)
}

/// Two-sided one-sample KS test of uniformity with the asymptotic p-value, using
/// Stephens' finite-sample scaling `λ = (√n + 0.12 + 0.11/√n) D`.
pub fn ks_test(pits: &[f64]) -> Result<TestResult> {
    if pits.len() < 5 {
        return Err(Error::invalid("KS test needs at least 5 values"));
    }
    if pits.iter().any(|u| !(0.0..=1.0).contains(u)) {
        return Err(Error::invalid("PIT values must lie in [0, 1]"));
    }
    let d = ks_statistic(pits);
    let rn = (pits.len() as f64).sqrt();
    let lambda = (rn + 0.12 + 0.11 / rn) * d;
    Ok(TestResult {
        statistic: d,
        p_value: kolmogorov_survival(lambda),
    })
}

/// Which transform of the PITs is tested for serial correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Moment {
    /// Demeaned values.
    First,
    /// Squared demeaned values.
    Second,
}

/// Ljung–Box portmanteau test with `lags` autocorrelations against χ²(lags).
pub fn ljung_box(series: &[f64], moment: Moment, lags: usize) -> Result<TestResult> {
    let n = series.len();
    if n <= 10 || lags == 0 || lags >= n {
        return Err(Error::invalid(format!(
            "Ljung-Box needs more than 10 observations and 0 < lags < n (n={n}, lags={lags})"
        )));
    }
    let m = crate::math::mean(series);
    let z: Vec<f64> = match moment {
        Moment::First => series.iter().map(|x| x - m).collect(),
        Moment::Second => series.iter().map(|x| (x - m) * (x - m)).collect(),
    };
    let zm = crate::math::mean(&z);
    let dev: Vec<f64> = z.iter().map(|v| v - zm).collect();
    let denom: f64 = dev.iter().map(|v| v * v).sum();
    if !(denom > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let nf = n as f64;
    let q = nf
        * (nf + 2.0)
        * (1..=lags)
            .map(|k| {
                let r: f64 = (k..n).map(|t| dev[t] * dev[t - k]).sum::<f64>() / denom;
                r * r / (nf - k as f64)
            })
            .sum::<f64>();
    let chi = ChiSquared::new(lags as f64).expect("positive degrees of freedom");
    Ok(TestResult {
        statistic: q,
        p_value: chi.sf(q),
    })
}

/// Average predictive density: mean of the exponentiated log scores.
pub fn apd(log_scores: &[f64]) -> Result<f64> {
    if log_scores.is_empty() {
        return Err(Error::invalid("no log scores"));
    }
    Ok(log_scores.iter().map(|s| s.exp()).sum::<f64>() / log_scores.len() as f64)
}
