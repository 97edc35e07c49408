use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::RegressionData;
use crate::domain::{MsarDraw, TimeSeries, TransitionMatrix, ViewSpec};
use crate::error::{Error, Result};

/// Per-regime sufficient statistics of `y_t` on `x_t = (1, y_{t-1}, ..., y_{t-p})`.
#[derive(Debug, Clone)]
pub(crate) struct RegimeStats {
    pub dim: usize,
    pub count: Vec<usize>,
    pub syy: Vec<f64>,
    /// `K x dim`
    pub sxy: Vec<f64>,
    /// `K x dim x dim`
    pub sxx: Vec<f64>,
}

impl RegimeStats {
    pub(crate) fn new(data: &RegressionData, states: &[u8], k: usize) -> Self {
        let dim = data.lags + 1;
        let mut s = RegimeStats {
            dim,
            count: vec![0; k],
            syy: vec![0.0; k],
            sxy: vec![0.0; k * dim],
            sxx: vec![0.0; k * dim * dim],
        };
        let mut x = vec![1.0; dim];
        for (t, &st) in states.iter().enumerate() {
            let r = st as usize;
            x[1..].copy_from_slice(data.lag_row(t));
            let y = data.target(t);
            s.count[r] += 1;
            s.syy[r] += y * y;
            for a in 0..dim {
                s.sxy[r * dim + a] += x[a] * y;
                for b in 0..dim {
                    s.sxx[(r * dim + a) * dim + b] += x[a] * x[b];
                }
            }
        }
        s
    }

    /// Residual sum of squares in regime `r` for intercept `beta` and AR vector `alpha`.
    pub(crate) fn ssr(&self, r: usize, beta: f64, alpha: &[f64]) -> f64 {
        let d = self.dim;
        let coef = |a: usize| if a == 0 { beta } else { alpha[a - 1] };
        let mut out = self.syy[r];
        for a in 0..d {
            let ca = coef(a);
            out -= 2.0 * ca * self.sxy[r * d + a];
            for b in 0..d {
                out += ca * coef(b) * self.sxx[(r * d + a) * d + b];
            }
        }
        out.max(0.0)
    }
}

/// Gaussian full conditional of `(β_1..β_K, α_1..α_p)`.
#[derive(Debug, Clone)]
pub struct RegressionPosterior {
    pub mean: DVector<f64>,
    pub precision: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl RegressionPosterior {
    pub fn covariance(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    /// `0.5 ln|P|`.
    pub fn half_log_det_precision(&self) -> f64 {
        self.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let d = self.mean.len();
        let z = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
        // P = L L'  =>  x = m + L'^{-1} z has covariance P^{-1}
        let l = self.chol.l();
        let offset = l
            .transpose()
            .solve_upper_triangular(&z)
            .expect("Cholesky factor is nonsingular");
        &self.mean + offset
    }

    pub fn ln_pdf(&self, x: &DVector<f64>) -> f64 {
        let d = self.mean.len() as f64;
        let diff = x - &self.mean;
        let q = (&self.precision * &diff).dot(&diff);
        self.half_log_det_precision() - 0.5 * d * (2.0 * std::f64::consts::PI).ln() - 0.5 * q
    }
}

pub(crate) fn regression_posterior_stats(
    stats: &RegimeStats,
    view: &ViewSpec,
    sigma2: &[f64],
) -> Result<RegressionPosterior> {
    let k = view.regimes;
    let p = view.lags;
    let d = k + p;
    let dim = stats.dim;
    let mut prec = DMatrix::<f64>::zeros(d, d);
    let mut rhs = DVector::<f64>::zeros(d);
    for r in 0..k {
        prec[(r, r)] += 1.0 / view.intercept_var[r];
        rhs[r] += view.intercept_mean[r] / view.intercept_var[r];
    }
    for j in 0..p {
        prec[(k + j, k + j)] += 1.0 / view.ar_var[j];
        rhs[k + j] += view.ar_mean[j] / view.ar_var[j];
    }
    // column a of x maps to coefficient index: a = 0 -> beta_r, a >= 1 -> alpha_{a-1}
    for r in 0..k {
        if stats.count[r] == 0 {
            continue;
        }
        let w = 1.0 / sigma2[r];
        let idx = |a: usize| if a == 0 { r } else { k + a - 1 };
        for a in 0..dim {
            rhs[idx(a)] += w * stats.sxy[r * dim + a];
            for b in 0..dim {
                prec[(idx(a), idx(b))] += w * stats.sxx[(r * dim + a) * dim + b];
            }
        }
    }
    let chol = Cholesky::new(prec.clone()).ok_or(Error::IllPosedRegression)?;
    let mean = chol.solve(&rhs);
    if mean.iter().any(|v| !v.is_finite()) {
        return Err(Error::IllPosedRegression);
    }
    Ok(RegressionPosterior {
        mean,
        precision: prec,
        chol,
    })
}

fn check_states(data: &RegressionData, states: &[u8], k: usize) -> Result<()> {
    if states.len() != data.len() {
        return Err(Error::invalid(format!(
            "regime path has length {}, usable sample has {}",
            states.len(),
            data.len()
        )));
    }
    if let Some(&s) = states.iter().find(|&&s| s as usize >= k) {
        return Err(Error::invalid(format!("state label {s} outside 0..{k}")));
    }
    Ok(())
}

/// Conditional posterior of the regression coefficients given the regime path and variances.
pub fn regression_posterior(
    y: &TimeSeries,
    states: &[u8],
    view: &ViewSpec,
    sigma2: &[f64],
) -> Result<RegressionPosterior> {
    let data = RegressionData::new(y.values(), view.lags)?;
    check_states(&data, states, view.regimes)?;
    let stats = RegimeStats::new(&data, states, view.regimes);
    regression_posterior_stats(&stats, view, sigma2)
}

/// Joint draw of `(β, α)` from their normal full conditional.
pub fn sample_regression<R: Rng + ?Sized>(
    y: &TimeSeries,
    states: &[u8],
    view: &ViewSpec,
    sigma2: &[f64],
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let post = regression_posterior(y, states, view, sigma2)?;
    Ok(split_coefficients(&post.sample(rng), view.regimes))
}

pub(crate) fn split_coefficients(x: &DVector<f64>, k: usize) -> (Vec<f64>, Vec<f64>) {
    (x.iter().take(k).copied().collect(), x.iter().skip(k).copied().collect())
}

/// `(shape, scale)` of each regime's inverse-gamma full conditional.
pub fn sigma2_posterior(
    y: &TimeSeries,
    states: &[u8],
    beta: &[f64],
    alpha: &[f64],
    view: &ViewSpec,
    c0: f64,
) -> Result<Vec<(f64, f64)>> {
    let data = RegressionData::new(y.values(), view.lags)?;
    check_states(&data, states, view.regimes)?;
    Ok(sigma2_posterior_data(&data, states, beta, alpha, view, c0))
}

pub(crate) fn sigma2_posterior_data(
    data: &RegressionData,
    states: &[u8],
    beta: &[f64],
    alpha: &[f64],
    view: &ViewSpec,
    c0: f64,
) -> Vec<(f64, f64)> {
    let k = view.regimes;
    let mut n = vec![0usize; k];
    let mut ssr = vec![0.0; k];
    for (t, &s) in states.iter().enumerate() {
        let s = s as usize;
        let e = data.target(t) - data.ar_part(t, alpha) - beta[s];
        n[s] += 1;
        ssr[s] += e * e;
    }
    (0..k)
        .map(|r| (view.variance_shape + 0.5 * n[r] as f64, c0 + 0.5 * ssr[r]))
        .collect()
}

/// `σ²_k ~ IG(c0 + N_k/2, C0 + SSR_k/2)`; empty regimes draw from the prior.
pub fn sample_sigma2<R: Rng + ?Sized>(
    y: &TimeSeries,
    states: &[u8],
    beta: &[f64],
    alpha: &[f64],
    view: &ViewSpec,
    c0: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let params = sigma2_posterior(y, states, beta, alpha, view, c0)?;
    Ok(params
        .into_iter()
        .map(|(a, b)| inv_gamma_variate(a, b, rng))
        .collect())
}

pub(crate) fn inv_gamma_variate<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> f64 {
    // 1/Gamma(shape, rate = scale)
    let g: f64 = Gamma::new(shape, 1.0 / scale).expect("valid gamma").sample(rng);
    1.0 / g
}

/// `(shape, rate)` of the Gamma full conditional of the variance hyperparameter C0.
pub fn c0_posterior(sigma2: &[f64], view: &ViewSpec) -> (f64, f64) {
    let shape = view.hyper_shape + sigma2.len() as f64 * view.variance_shape;
    let rate = view.hyper_rate + sigma2.iter().map(|s| 1.0 / s).sum::<f64>();
    (shape, rate)
}

pub fn sample_c0<R: Rng + ?Sized>(sigma2: &[f64], view: &ViewSpec, rng: &mut R) -> f64 {
    let (shape, rate) = c0_posterior(sigma2, view);
    Gamma::new(shape, 1.0 / rate).expect("valid gamma").sample(rng)
}

/// `n[i][j]` = number of observed `i -> j` transitions along the path.
pub fn transition_counts(states: &[u8], k: usize) -> Vec<Vec<f64>> {
    let mut n = vec![vec![0.0; k]; k];
    for w in states.windows(2) {
        n[w[0] as usize][w[1] as usize] += 1.0;
    }
    n
}

/// Rows drawn independently from `Dirichlet(e_k + n_k)`.
pub fn sample_xi<R: Rng + ?Sized>(states: &[u8], view: &ViewSpec, rng: &mut R) -> TransitionMatrix {
    let k = view.regimes;
    if k == 1 {
        return TransitionMatrix::identity(1);
    }
    let counts = transition_counts(states, k);
    let mut data = Vec::with_capacity(k * k);
    for i in 0..k {
        let alpha: Vec<f64> = (0..k)
            .map(|j| view.transition_prior[i][j] + counts[i][j])
            .collect();
        data.extend(dirichlet_variate(&alpha, rng));
    }
    TransitionMatrix::new(k, data).expect("Dirichlet rows are stochastic")
}

/// Dirichlet draw via log-gamma variates, robust to tiny concentration parameters.
pub(crate) fn dirichlet_variate<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Vec<f64> {
    let logs: Vec<f64> = alpha.iter().map(|&a| ln_gamma_variate(a, rng)).collect();
    let lse = crate::math::log_sum_exp(&logs);
    let mut row: Vec<f64> = logs.iter().map(|l| (l - lse).exp()).collect();
    let s: f64 = row.iter().sum();
    for v in &mut row {
        *v /= s;
    }
    row
}

fn ln_gamma_variate<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape >= 1.0 {
        let g: f64 = Gamma::new(shape, 1.0).expect("valid gamma").sample(rng);
        g.ln()
    } else {
        // G(a) = G(a + 1) U^{1/a}
        let g: f64 = Gamma::new(shape + 1.0, 1.0).expect("valid gamma").sample(rng);
        let u: f64 = rng.random::<f64>();
        g.ln() + u.max(f64::MIN_POSITIVE).ln() / shape
    }
}

/// One draw of every parameter, including C0, from the view's prior. The regime path is
/// left empty.
pub fn sample_prior<R: Rng + ?Sized>(view: &ViewSpec, rng: &mut R) -> MsarDraw {
    let k = view.regimes;
    let mut normal = |m: f64, v: f64| {
        let z: f64 = StandardNormal.sample(rng);
        m + v.sqrt() * z
    };
    let beta: Vec<f64> = (0..k)
        .map(|r| normal(view.intercept_mean[r], view.intercept_var[r]))
        .collect();
    let alpha: Vec<f64> = (0..view.lags)
        .map(|j| normal(view.ar_mean[j], view.ar_var[j]))
        .collect();
    let c0: f64 = Gamma::new(view.hyper_shape, 1.0 / view.hyper_rate)
        .expect("valid gamma")
        .sample(rng);
    let sigma2 = (0..k)
        .map(|_| inv_gamma_variate(view.variance_shape, c0, rng))
        .collect();
    let xi = if k == 1 {
        TransitionMatrix::identity(1)
    } else {
        let data = view
            .transition_prior
            .iter()
            .flat_map(|row| dirichlet_variate(row, rng))
            .collect();
        TransitionMatrix::new(k, data).expect("Dirichlet rows are stochastic")
    };
    MsarDraw {
        beta,
        alpha,
        sigma2,
        xi,
        states: Vec::new(),
        c0,
    }
}
