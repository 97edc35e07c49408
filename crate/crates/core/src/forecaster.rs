//! Predictive densities, PITs and log scores from posterior draws.
//!
//! For one-step-ahead forecasts every draw contributes all `K` regime components,
//! weighted by its transition row out of the last filtered state:
//! `p(y_{T+1} | θ, S_T) = Σ_k ξ[S_T, k] N(Σ_j α_j y_{T+1-j} + β_k, σ²_k)`.
//! Averaging over draws integrates out parameter and state uncertainty.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::{Component, ForecastDensity, MsarDraw, Quarter, TimeSeries};
use crate::error::{Error, Result};
use crate::sampler::{draw_index, PosteriorDraws};

/// Log scores below this are floored to keep sums finite.
pub const LOG_SCORE_FLOOR: f64 = -690.775_527_898_213_7; // ln(1e-300)

const PATH_SEED_SALT: u64 = 0x5851_f42d_4c95_7f2d;
const KERNEL_SEED_SALT: u64 = 0x2545_f491_4f6c_dd1d;

/// How posterior draws are turned into a predictive density.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityMode {
    /// Exact normal mixture over draws and next-period regimes.
    #[default]
    Mixture,
    /// One simulated outcome per draw, smoothed by a Gaussian kernel with Silverman's
    /// bandwidth. Kept for replicating kernel-based studies; noisier than the mixture.
    Kernel,
}

impl std::str::FromStr for DensityMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mixture" => Ok(DensityMode::Mixture),
            "kernel" => Ok(DensityMode::Kernel),
            _ => Err(Error::invalid(format!("unknown density mode {s:?} (mixture or kernel)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewForecast {
    pub view_id: u32,
    pub density: ForecastDensity,
    pub origin: Quarter,
    pub horizon: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogScore {
    pub value: f64,
    pub floored: bool,
}

/// `(y_T, y_{T-1}, ..., y_{T-p+1})` for origin `T`.
fn recent_values(y: &TimeSeries, origin: Quarter, lags: usize) -> Result<Vec<f64>> {
    (0..lags as i32)
        .map(|j| {
            y.get(origin - j).ok_or_else(|| {
                Error::invalid(format!("series does not cover {} needed as a lag", origin - j))
            })
        })
        .collect()
}

fn check_inputs(draws: &PosteriorDraws, h: usize) -> Result<()> {
    if h < 1 {
        return Err(Error::invalid("forecast horizon must be at least 1"));
    }
    if draws.is_empty() {
        return Err(Error::invalid("no posterior draws to forecast from"));
    }
    Ok(())
}

fn last_state(d: &MsarDraw) -> usize {
    d.states.last().copied().unwrap_or(0) as usize
}

fn ar_mean(alpha: &[f64], recent: &[f64]) -> f64 {
    alpha.iter().zip(recent).map(|(a, x)| a * x).sum()
}

/// Appends the Rao-Blackwellized one-step mixture of `d` from state `s` given the lag vector.
fn push_one_step(out: &mut Vec<Component>, d: &MsarDraw, s: usize, recent: &[f64], mass: f64) {
    let m = ar_mean(&d.alpha, recent);
    for (k, &p) in d.xi.row(s).iter().enumerate() {
        if p > 0.0 {
            out.push(Component {
                mean: m + d.beta[k],
                variance: d.sigma2[k],
                weight: mass * p,
            });
        }
    }
}

/// Predictive density for `origin + h`, where the origin is the end of the estimation
/// window. `y` must contain the last `p` observations up to the origin.
///
/// For `h = 1` the mixture is exact given the draws. For `h > 1` regimes and
/// observations up to `T + h - 1` are simulated once per draw (seeded from the sampler
/// seed), and the final step is again Rao-Blackwellized.
pub fn forecast_view(y: &TimeSeries, draws: &PosteriorDraws, h: usize) -> Result<ViewForecast> {
    check_inputs(draws, h)?;
    let origin = draws.window_end;
    let recent = recent_values(y, origin, draws.lags)?;
    let mass = 1.0 / draws.len() as f64;
    let mut comps = Vec::with_capacity(draws.len() * draws.regimes);
    if h == 1 {
        for d in &draws.draws {
            push_one_step(&mut comps, d, last_state(d), &recent, mass);
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(draws.config.seed ^ PATH_SEED_SALT);
        for d in &draws.draws {
            let (s, lagged) = simulate_path(d, last_state(d), &recent, h - 1, &mut rng);
            push_one_step(&mut comps, d, s, &lagged, mass);
        }
    }
    Ok(ViewForecast {
        view_id: draws.view_id,
        density: ForecastDensity::normalized(comps, origin + h as i32)?,
        origin,
        horizon: h,
    })
}

/// [`forecast_view`] or, in kernel mode, a kernel estimate over one simulated outcome
/// per draw (seeded from the sampler seed).
pub fn forecast_view_with(
    y: &TimeSeries,
    draws: &PosteriorDraws,
    h: usize,
    mode: DensityMode,
) -> Result<ViewForecast> {
    match mode {
        DensityMode::Mixture => forecast_view(y, draws, h),
        DensityMode::Kernel => {
            let sim = forecast_view_simulated(y, draws, h, draws.config.seed ^ KERNEL_SEED_SALT)?;
            let mut rng = ChaCha8Rng::seed_from_u64(draws.config.seed ^ KERNEL_SEED_SALT.rotate_left(17));
            let outcomes: Vec<f64> = sim
                .density
                .components()
                .iter()
                .map(|c| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    c.mean + c.variance.sqrt() * z
                })
                .collect();
            Ok(ViewForecast {
                density: ForecastDensity::kernel_fit(&outcomes, sim.density.target())?,
                ..sim
            })
        }
    }
}

/// Simulates `steps` periods forward; returns the final state and the updated lag vector.
fn simulate_path<R: Rng + ?Sized>(
    d: &MsarDraw,
    mut s: usize,
    recent: &[f64],
    steps: usize,
    rng: &mut R,
) -> (usize, Vec<f64>) {
    let mut lagged = recent.to_vec();
    for _ in 0..steps {
        s = draw_index(d.xi.row(s), rng);
        let z: f64 = StandardNormal.sample(rng);
        let next = ar_mean(&d.alpha, &lagged) + d.beta[s] + d.sigma2[s].sqrt() * z;
        if !lagged.is_empty() {
            lagged.rotate_right(1);
            lagged[0] = next;
        }
    }
    (s, lagged)
}

/// Forecast that samples every future regime instead of integrating over it: one
/// component per draw. Unbiased but noisier than [`forecast_view`].
pub fn forecast_view_simulated(
    y: &TimeSeries,
    draws: &PosteriorDraws,
    h: usize,
    seed: u64,
) -> Result<ViewForecast> {
    check_inputs(draws, h)?;
    let origin = draws.window_end;
    let recent = recent_values(y, origin, draws.lags)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mass = 1.0 / draws.len() as f64;
    let mut comps = Vec::with_capacity(draws.len());
    for d in &draws.draws {
        let (s, lagged) = simulate_path(d, last_state(d), &recent, h - 1, &mut rng);
        let k = draw_index(d.xi.row(s), &mut rng);
        comps.push(Component {
            mean: ar_mean(&d.alpha, &lagged) + d.beta[k],
            variance: d.sigma2[k],
            weight: mass,
        });
    }
    Ok(ViewForecast {
        view_id: draws.view_id,
        density: ForecastDensity::normalized(comps, origin + h as i32)?,
        origin,
        horizon: h,
    })
}

/// Probability integral transform of a realization.
pub fn pit(density: &ForecastDensity, realized: f64) -> f64 {
    density.cdf(realized)
}

pub fn log_score(density: &ForecastDensity, realized: f64) -> LogScore {
    floor_log_score(density.ln_pdf(realized))
}

pub(crate) fn floor_log_score(v: f64) -> LogScore {
    if v.is_nan() || v < LOG_SCORE_FLOOR {
        LogScore {
            value: LOG_SCORE_FLOOR,
            floored: true,
        }
    } else {
        LogScore {
            value: v,
            floored: false,
        }
    }
}

/// Writes `origin_period,view_id,component,mean,variance,weight` rows.
pub fn write_forecasts<W: Write>(w: W, forecasts: &[ViewForecast]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["origin_period", "view_id", "component", "mean", "variance", "weight"])?;
    for f in forecasts {
        for (i, c) in f.density.components().iter().enumerate() {
            wtr.write_record([
                f.origin.to_string(),
                f.view_id.to_string(),
                i.to_string(),
                c.mean.to_string(),
                c.variance.to_string(),
                c.weight.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}
