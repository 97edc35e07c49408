//! Marginal likelihood `p(y | view)` by bridge sampling.
//!
//! The importance density is an equally weighted mixture of complete-data full-conditional
//! kernels, one per selected posterior draw `l`:
//!
//! `q_l(ϑ) = N((β, α); m_l, P_l⁻¹) · Π_k IG(σ²_k; c0 + N_k/2, C0_l + SSR_k(β, α)/2)
//!           · Π_k Dir(ξ_k; e_k + n_k)`
//!
//! where the regime path `S_l` fixes `N_k`, `n_k` and the sufficient statistics, and the
//! regression kernel conditions on the draw's own variances. When the prior is invariant
//! under some regime relabelings, the mixture is averaged over that group so that it
//! matches the symmetry of the posterior whatever modes the chain happened to visit.
//!
//! The variance hyperparameter C0 is integrated out of the prior analytically, so `ϑ`
//! excludes it and the estimator targets `∫ p(y|ϑ) p(ϑ) dϑ` directly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::conditionals::{
    dirichlet_variate, inv_gamma_variate, regression_posterior_stats, transition_counts,
    RegimeStats, RegressionPosterior,
};
use super::filter::forward_filter_data;
use super::{PosteriorDraws, RegressionData};
use crate::domain::{MsarDraw, TimeSeries, TransitionMatrix, ViewSpec};
use crate::error::{Error, Result};
use crate::math::{dirichlet_ln_norm, log_add_exp, log_sum_exp, normal_ln_pdf};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BridgeConfig {
    /// Upper bound on (selected draws) x (label symmetries) mixture components.
    pub max_components: usize,
    /// Draws from the importance density; `None` uses as many as there are posterior draws.
    pub proposal_draws: Option<usize>,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Seed for the importance draws; `None` derives one from the sampler seed.
    pub seed: Option<u64>,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        BridgeConfig {
            max_components: 1000,
            proposal_draws: None,
            tolerance: 1e-10,
            max_iterations: 1000,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeEstimate {
    pub log_ml: f64,
    /// Plain importance-sampling estimate from the proposal draws, used to start the iteration.
    pub importance_log_ml: f64,
    pub iterations: usize,
    pub components: usize,
    pub symmetries: usize,
    pub posterior_draws: usize,
    pub proposal_draws: usize,
}

/// Log prior density of `(β, α, σ², ξ)` with C0 integrated out.
pub fn log_prior_density(view: &ViewSpec, draw: &MsarDraw) -> f64 {
    let k = view.regimes;
    let mut lp = 0.0;
    for r in 0..k {
        lp += normal_ln_pdf(draw.beta[r], view.intercept_mean[r], view.intercept_var[r]);
    }
    for j in 0..view.lags {
        lp += normal_ln_pdf(draw.alpha[j], view.ar_mean[j], view.ar_var[j]);
    }
    lp += log_sigma2_prior(view, &draw.sigma2);
    if k > 1 {
        for r in 0..k {
            let alpha = &view.transition_prior[r];
            lp += dirichlet_ln_norm(alpha)
                + alpha
                    .iter()
                    .zip(draw.xi.row(r))
                    .map(|(a, x)| (a - 1.0) * x.ln())
                    .sum::<f64>();
        }
    }
    lp
}

/// `ln ∫ Π_k IG(σ²_k; c0, C0) Gamma(C0; g0, G0) dC0`.
fn log_sigma2_prior(view: &ViewSpec, sigma2: &[f64]) -> f64 {
    let c0 = view.variance_shape;
    let (g0, big_g0) = (view.hyper_shape, view.hyper_rate);
    let k = sigma2.len() as f64;
    let shape = g0 + k * c0;
    let rate = big_g0 + sigma2.iter().map(|s| 1.0 / s).sum::<f64>();
    sigma2.iter().map(|s| -(c0 + 1.0) * s.ln()).sum::<f64>() - k * ln_gamma(c0)
        + g0 * big_g0.ln()
        - ln_gamma(g0)
        + ln_gamma(shape)
        - shape * rate.ln()
}

/// `ln p(y | ϑ) + ln p(ϑ)` with the chain started from the stationary distribution.
pub fn log_joint_density(y: &TimeSeries, view: &ViewSpec, draw: &MsarDraw) -> Result<f64> {
    let data = RegressionData::new(y.values(), view.lags)?;
    Ok(log_joint_data(&data, view, draw))
}

fn log_joint_data(data: &RegressionData, view: &ViewSpec, draw: &MsarDraw) -> f64 {
    let init = draw.xi.initial_distribution();
    match forward_filter_data(data, draw, &init) {
        Ok(f) => f.log_likelihood + log_prior_density(view, draw),
        Err(_) => f64::NEG_INFINITY,
    }
}

struct Kernel {
    reg: RegressionPosterior,
    /// Normalising constant of the regression kernel, `0.5 ln|P| - d/2 ln 2π`.
    reg_ln_norm: f64,
    stats: RegimeStats,
    c0: f64,
    sig_shape: Vec<f64>,
    sig_ln_gamma: Vec<f64>,
    /// `K x K`, empty when K = 1.
    dir_alpha: Vec<f64>,
    dir_norm: Vec<f64>,
}

impl Kernel {
    fn new(view: &ViewSpec, data: &RegressionData, draw: &MsarDraw) -> Result<Kernel> {
        let k = view.regimes;
        let stats = RegimeStats::new(data, &draw.states, k);
        let reg = regression_posterior_stats(&stats, view, &draw.sigma2)?;
        let sig_shape: Vec<f64> = stats
            .count
            .iter()
            .map(|&n| view.variance_shape + 0.5 * n as f64)
            .collect();
        let sig_ln_gamma = sig_shape.iter().map(|&a| ln_gamma(a)).collect();
        let (mut dir_alpha, mut dir_norm) = (Vec::new(), Vec::new());
        if k > 1 {
            let counts = transition_counts(&draw.states, k);
            for r in 0..k {
                let row: Vec<f64> = (0..k)
                    .map(|j| view.transition_prior[r][j] + counts[r][j])
                    .collect();
                dir_norm.push(dirichlet_ln_norm(&row));
                dir_alpha.extend(row);
            }
        }
        let reg_ln_norm = reg.half_log_det_precision()
            - (view.regimes + view.lags) as f64 * crate::math::LN_SQRT_2PI;
        Ok(Kernel {
            reg,
            reg_ln_norm,
            stats,
            c0: draw.c0,
            sig_shape,
            sig_ln_gamma,
            dir_alpha,
            dir_norm,
        })
    }

    fn ln_density(&self, pt: &Point, k: usize, scratch: &mut Vec<f64>) -> f64 {
        let d = pt.theta.len();
        scratch.clear();
        scratch.extend(pt.theta.iter().zip(self.reg.mean.iter()).map(|(x, m)| x - m));
        let mut quad = 0.0;
        for a in 0..d {
            let mut row = 0.0;
            for b in 0..d {
                row += self.reg.precision[(a, b)] * scratch[b];
            }
            quad += scratch[a] * row;
        }
        let mut out = self.reg_ln_norm - 0.5 * quad;
        let alpha = &pt.theta[k..];
        for r in 0..k {
            let scale = self.c0 + 0.5 * self.stats.ssr(r, pt.theta[r], alpha);
            let a = self.sig_shape[r];
            out += a * scale.ln() - self.sig_ln_gamma[r] - (a + 1.0) * pt.ln_sigma2[r]
                - scale / pt.sigma2[r];
        }
        if k > 1 {
            for r in 0..k {
                out += self.dir_norm[r];
                for j in 0..k {
                    out += (self.dir_alpha[r * k + j] - 1.0) * pt.ln_xi[r * k + j];
                }
            }
        }
        out
    }

    fn sample<R: Rng + ?Sized>(&self, view: &ViewSpec, rng: &mut R) -> MsarDraw {
        let k = view.regimes;
        let theta = self.reg.sample(rng);
        let beta: Vec<f64> = theta.iter().take(k).copied().collect();
        let alpha: Vec<f64> = theta.iter().skip(k).copied().collect();
        let sigma2 = (0..k)
            .map(|r| {
                let scale = self.c0 + 0.5 * self.stats.ssr(r, beta[r], &alpha);
                inv_gamma_variate(self.sig_shape[r], scale, rng)
            })
            .collect();
        let xi = if k > 1 {
            let mut rows = Vec::with_capacity(k * k);
            for r in 0..k {
                rows.extend(dirichlet_variate(&self.dir_alpha[r * k..(r + 1) * k], rng));
            }
            TransitionMatrix::new(k, rows).expect("Dirichlet rows are stochastic")
        } else {
            TransitionMatrix::identity(1)
        };
        MsarDraw {
            beta,
            alpha,
            sigma2,
            xi,
            states: Vec::new(),
            c0: self.c0,
        }
    }
}

/// Parameter point in the layout the kernels evaluate.
struct Point {
    theta: Vec<f64>,
    sigma2: Vec<f64>,
    ln_sigma2: Vec<f64>,
    ln_xi: Vec<f64>,
}

impl Point {
    fn new(draw: &MsarDraw, perm: &[usize]) -> Point {
        let k = perm.len();
        let mut theta: Vec<f64> = perm.iter().map(|&o| draw.beta[o]).collect();
        theta.extend_from_slice(&draw.alpha);
        let sigma2: Vec<f64> = perm.iter().map(|&o| draw.sigma2[o]).collect();
        let ln_sigma2 = sigma2.iter().map(|s| s.ln()).collect();
        let mut ln_xi = Vec::new();
        if k > 1 {
            for i in 0..k {
                for j in 0..k {
                    ln_xi.push(draw.xi.get(perm[i], perm[j]).ln());
                }
            }
        }
        Point {
            theta,
            sigma2,
            ln_sigma2,
            ln_xi,
        }
    }
}

struct Proposal {
    kernels: Vec<Kernel>,
    symmetries: Vec<Vec<usize>>,
    k: usize,
}

impl Proposal {
    fn ln_density(&self, draw: &MsarDraw) -> f64 {
        let mut terms = Vec::with_capacity(self.kernels.len() * self.symmetries.len());
        let mut scratch = Vec::new();
        for g in &self.symmetries {
            let pt = Point::new(draw, g);
            for kern in &self.kernels {
                terms.push(kern.ln_density(&pt, self.k, &mut scratch));
            }
        }
        log_sum_exp(&terms) - (terms.len() as f64).ln()
    }

    fn sample<R: Rng + ?Sized>(&self, view: &ViewSpec, rng: &mut R) -> MsarDraw {
        let l = rng.random_range(0..self.kernels.len());
        let g = rng.random_range(0..self.symmetries.len());
        let d = self.kernels[l].sample(view, rng);
        if g == 0 {
            d
        } else {
            d.permuted(&self.symmetries[g])
        }
    }
}

/// Bridge-sampling estimate of `ln p(y | view)` with default settings.
pub fn log_marginal_likelihood(y: &TimeSeries, view: &ViewSpec, draws: &PosteriorDraws) -> Result<f64> {
    log_marginal_likelihood_with(y, view, draws, &BridgeConfig::default()).map(|e| e.log_ml)
}

pub fn log_marginal_likelihood_with(
    y: &TimeSeries,
    view: &ViewSpec,
    draws: &PosteriorDraws,
    cfg: &BridgeConfig,
) -> Result<BridgeEstimate> {
    view.validate()?;
    if draws.is_empty() {
        return Err(Error::invalid("no posterior draws"));
    }
    if draws.regimes != view.regimes || draws.lags != view.lags {
        return Err(Error::invalid("draws were produced under a different view"));
    }
    let data = RegressionData::new(y.values(), view.lags)?;
    if draws.draws[0].states.len() != data.len() {
        return Err(Error::invalid("draws were produced on a different window"));
    }
    let k = view.regimes;
    let symmetries = view.label_symmetries();
    let budget = (cfg.max_components / symmetries.len()).max(1);
    let n = draws.len();
    let selected = budget.min(n);
    let kernels = (0..selected)
        .map(|i| {
            // evenly spaced through the run
            let idx = i * n / selected;
            Kernel::new(view, &data, &draws.draws[idx])
        })
        .collect::<Result<Vec<_>>>()?;
    let proposal = Proposal {
        kernels,
        symmetries,
        k,
    };

    let mut l1 = Vec::with_capacity(n);
    for d in &draws.draws {
        let v = log_joint_data(&data, view, d) - proposal.ln_density(d);
        if v.is_finite() {
            l1.push(v);
        }
    }
    let n2 = cfg.proposal_draws.unwrap_or(n).max(1);
    let seed = cfg
        .seed
        .unwrap_or(draws.config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut l2 = Vec::with_capacity(n2);
    for _ in 0..n2 {
        let d = proposal.sample(view, &mut rng);
        let lq = proposal.ln_density(&d);
        if !lq.is_finite() {
            continue;
        }
        // -inf (zero joint density) is a legitimate value here
        let v = log_joint_data(&data, view, &d) - lq;
        if !v.is_nan() && v != f64::INFINITY {
            l2.push(v);
        }
    }
    if l1.is_empty() || l2.is_empty() {
        return Err(Error::BridgeNotConverged {
            iterations: 0,
            last_change: f64::NAN,
            estimate: f64::NAN,
        });
    }

    let (it, log_ml, is_est) = bridge_iterate(&l1, &l2, cfg.tolerance, cfg.max_iterations)?;
    Ok(BridgeEstimate {
        log_ml,
        importance_log_ml: is_est,
        iterations: it,
        components: proposal.kernels.len() * proposal.symmetries.len(),
        symmetries: proposal.symmetries.len(),
        posterior_draws: l1.len(),
        proposal_draws: l2.len(),
    })
}

/// Meng-Wong iteration on log ratios `ln p*/q` at posterior (`l1`) and proposal (`l2`) draws.
/// Returns `(iterations, ln ratio, importance-sampling starting value)`.
pub(crate) fn bridge_iterate(
    l1: &[f64],
    l2: &[f64],
    tolerance: f64,
    max_iterations: usize,
) -> Result<(usize, f64, f64)> {
    let n1 = l1.len() as f64;
    let n2 = l2.len() as f64;
    let ln_s1 = (n1 / (n1 + n2)).ln();
    let ln_s2 = (n2 / (n1 + n2)).ln();
    let mut sorted = l1.to_vec();
    sorted.sort_by(f64::total_cmp);
    let shift = sorted[sorted.len() / 2];
    let l1: Vec<f64> = l1.iter().map(|v| v - shift).collect();
    let l2: Vec<f64> = l2.iter().map(|v| v - shift).collect();
    let is_est = log_sum_exp(&l2) - n2.ln();
    let mut log_r = if is_est.is_finite() { is_est } else { 0.0 };
    let mut num_terms = vec![0.0; l2.len()];
    let mut den_terms = vec![0.0; l1.len()];
    let mut change = f64::INFINITY;
    for it in 1..=max_iterations {
        for (t, &v) in num_terms.iter_mut().zip(&l2) {
            *t = v - log_add_exp(ln_s1 + v, ln_s2 + log_r);
        }
        for (t, &v) in den_terms.iter_mut().zip(&l1) {
            *t = -log_add_exp(ln_s1 + v, ln_s2 + log_r);
        }
        let next = (log_sum_exp(&num_terms) - n2.ln()) - (log_sum_exp(&den_terms) - n1.ln());
        if !next.is_finite() {
            break;
        }
        change = (next - log_r).abs();
        log_r = next;
        if change < tolerance {
            return Ok((it, log_r + shift, is_est + shift));
        }
    }
    Err(Error::BridgeNotConverged {
        iterations: max_iterations,
        last_change: change,
        estimate: log_r + shift,
    })
}
