use rand::Rng;

use super::RegressionData;
use crate::domain::{MsarDraw, TimeSeries};
use crate::error::{Error, Result};
use crate::math::normal_ln_pdf;

/// Filtered regime probabilities `P(S_t = k | y_1..y_t)` and the marginal log-likelihood.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    regimes: usize,
    /// Row-major `T x K`.
    filtered: Vec<f64>,
    pub log_likelihood: f64,
}

impl FilterState {
    pub fn regimes(&self) -> usize {
        self.regimes
    }

    pub fn len(&self) -> usize {
        self.filtered.len() / self.regimes
    }

    pub fn is_empty(&self) -> bool {
        self.filtered.is_empty()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.filtered[t * self.regimes..(t + 1) * self.regimes]
    }
}

/// `Σ_t log N(y_t; Σ_j α_j y_{t-j} + β_{S_t}, σ²_{S_t})` over the usable sample.
pub fn conditional_loglik(y: &TimeSeries, theta: &MsarDraw, states: &[u8]) -> Result<f64> {
    let data = RegressionData::new(y.values(), theta.lags())?;
    conditional_loglik_data(&data, theta, states)
}

pub(crate) fn conditional_loglik_data(
    data: &RegressionData,
    theta: &MsarDraw,
    states: &[u8],
) -> Result<f64> {
    if states.len() != data.len() {
        return Err(Error::invalid(format!(
            "regime path has length {}, usable sample has {}",
            states.len(),
            data.len()
        )));
    }
    let k = theta.regimes();
    let mut ll = 0.0;
    for (t, &s) in states.iter().enumerate() {
        let s = s as usize;
        if s >= k {
            return Err(Error::invalid(format!("state label {s} outside 0..{k} at t={t}")));
        }
        let mean = data.ar_part(t, &theta.alpha) + theta.beta[s];
        ll += normal_ln_pdf(data.target(t), mean, theta.sigma2[s]);
    }
    Ok(ll)
}

/// Hamilton filter in log space with per-step max subtraction.
pub fn forward_filter(y: &TimeSeries, theta: &MsarDraw, initial: &[f64]) -> Result<FilterState> {
    let data = RegressionData::new(y.values(), theta.lags())?;
    forward_filter_data(&data, theta, initial)
}

pub(crate) fn forward_filter_data(
    data: &RegressionData,
    theta: &MsarDraw,
    initial: &[f64],
) -> Result<FilterState> {
    let k = theta.regimes();
    if initial.len() != k
        || initial.iter().any(|&p| !(p >= 0.0))
        || (initial.iter().sum::<f64>() - 1.0).abs() > 1e-10
    {
        return Err(Error::invalid("initial distribution is not a simplex point"));
    }
    let n = data.len();
    let mut filtered = vec![0.0; n * k];
    let mut pred = initial.to_vec();
    let mut log_terms = vec![0.0; k];
    let ln_sd: Vec<f64> = theta.sigma2.iter().map(|s| 0.5 * s.ln()).collect();
    let mut ll = 0.0;
    for t in 0..n {
        let ar = data.ar_part(t, &theta.alpha);
        let yt = data.target(t);
        let mut max = f64::NEG_INFINITY;
        for j in 0..k {
            let z = yt - ar - theta.beta[j];
            let l = pred[j].ln() - crate::math::LN_SQRT_2PI - ln_sd[j]
                - 0.5 * z * z / theta.sigma2[j];
            log_terms[j] = l;
            if l > max {
                max = l;
            }
        }
        if !max.is_finite() {
            return Err(Error::DegenerateFilter { t });
        }
        let row = &mut filtered[t * k..(t + 1) * k];
        let mut s = 0.0;
        for j in 0..k {
            let v = (log_terms[j] - max).exp();
            row[j] = v;
            s += v;
        }
        for v in row.iter_mut() {
            *v /= s;
        }
        ll += max + s.ln();
        for (j, p) in pred.iter_mut().enumerate() {
            *p = (0..k).map(|i| row[i] * theta.xi.get(i, j)).sum();
        }
    }
    Ok(FilterState {
        regimes: k,
        filtered,
        log_likelihood: ll,
    })
}

/// Backward sampling of the regime path given a filter run for the same draw.
pub fn sample_states<R: Rng + ?Sized>(filter: &FilterState, theta: &MsarDraw, rng: &mut R) -> Vec<u8> {
    let k = filter.regimes;
    let n = filter.len();
    let mut states = vec![0u8; n];
    if k == 1 || n == 0 {
        return states;
    }
    let mut probs = vec![0.0; k];
    states[n - 1] = draw_index(filter.row(n - 1), rng) as u8;
    for t in (0..n - 1).rev() {
        let next = states[t + 1] as usize;
        let row = filter.row(t);
        for i in 0..k {
            probs[i] = row[i] * theta.xi.get(i, next);
        }
        states[t] = draw_index(&probs, rng) as u8;
    }
    states
}

/// Index drawn with probability proportional to `weights`.
pub(crate) fn draw_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // rounding: fall back to the last index with positive weight
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Quarter, TransitionMatrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn series(v: &[f64]) -> TimeSeries {
        TimeSeries::new(Quarter::new(2000, 1), v.to_vec()).unwrap()
    }

    fn draw(beta: Vec<f64>, alpha: Vec<f64>, sigma2: Vec<f64>, xi: Vec<f64>) -> MsarDraw {
        let k = beta.len();
        MsarDraw {
            beta,
            alpha,
            sigma2,
            xi: TransitionMatrix::new(k, xi).unwrap(),
            states: vec![],
            c0: 1.0,
        }
    }

    #[test]
    fn loglik_examples() {
        let d = draw(vec![0.0], vec![], vec![1.0], vec![1.0]);
        let ll = conditional_loglik(&series(&[0.0]), &d, &[0]).unwrap();
        assert!((ll + 0.918_938_5).abs() < 1e-7);
        let d = draw(vec![0.0], vec![0.5], vec![1.0], vec![1.0]);
        let ll = conditional_loglik(&series(&[2.0, 1.0]), &d, &[0]).unwrap();
        assert!((ll + 0.918_938_5).abs() < 1e-7);
    }

    #[test]
    fn loglik_rejects_bad_labels_and_lengths() {
        let d = draw(vec![0.0, 1.0], vec![], vec![1.0, 1.0], vec![0.5, 0.5, 0.5, 0.5]);
        assert!(conditional_loglik(&series(&[0.0, 1.0]), &d, &[0, 2]).is_err());
        assert!(conditional_loglik(&series(&[0.0, 1.0]), &d, &[0]).is_err());
    }

    #[test]
    fn loglik_matches_direct_summation() {
        let y = [0.3, -1.2, 0.8, 2.1, 0.4];
        let d = draw(vec![0.5, -0.4], vec![0.3, -0.1], vec![0.7, 1.9], vec![0.6, 0.4, 0.2, 0.8]);
        let states = [1u8, 0, 1];
        let ll = conditional_loglik(&series(&y), &d, &states).unwrap();
        let mut oracle = 0.0;
        for (i, t) in (2..5).enumerate() {
            let s = states[i] as usize;
            let mean = 0.3 * y[t - 1] - 0.1 * y[t - 2] + d.beta[s];
            let v = d.sigma2[s];
            oracle += -0.5 * (2.0 * std::f64::consts::PI * v).ln() - (y[t] - mean).powi(2) / (2.0 * v);
        }
        assert!((ll - oracle).abs() < 1e-12);
    }

    #[test]
    fn single_regime_filter_equals_conditional_loglik() {
        let y = series(&[0.1, 0.5, -0.3, 1.2, 0.9, 0.0]);
        let d = draw(vec![0.2], vec![0.4], vec![0.8], vec![1.0]);
        let f = forward_filter(&y, &d, &[1.0]).unwrap();
        let ll = conditional_loglik(&y, &d, &[0; 5]).unwrap();
        assert!((f.log_likelihood - ll).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_states(&f, &d, &mut rng), vec![0; 5]);
    }

    #[test]
    fn degenerate_step_is_reported() {
        let y = series(&[0.0, 1.0]);
        let d = draw(vec![0.0, 0.0], vec![], vec![1.0, 1.0], vec![1.0, 0.0, 0.0, 1.0]);
        // all prior mass on a regime whose density underflows is still finite in log space;
        // a zero initial vector is rejected as a non-simplex point instead
        assert!(forward_filter(&y, &d, &[0.0, 0.0]).is_err());
        let d = draw(vec![0.0, 0.0], vec![], vec![1.0, 1.0], vec![1.0, 0.0, 0.0, 1.0]);
        let mut bad = d.clone();
        bad.beta = vec![f64::NAN, f64::NAN];
        assert!(matches!(
            forward_filter(&y, &bad, &[0.5, 0.5]),
            Err(Error::DegenerateFilter { t: 0 })
        ));
    }

    #[test]
    fn backward_step_by_hand() {
        // two regimes, two periods, no lags
        let y = series(&[0.0, 1.0]);
        let d = draw(vec![0.0, 1.0], vec![], vec![1.0, 1.0], vec![0.9, 0.1, 0.2, 0.8]);
        let init = [0.5, 0.5];
        let f = forward_filter(&y, &d, &init).unwrap();
        let phi = |z: f64| (-0.5 * z * z).exp();
        // t = 0
        let a0 = [0.5 * phi(0.0), 0.5 * phi(-1.0)];
        let f0 = [a0[0] / (a0[0] + a0[1]), a0[1] / (a0[0] + a0[1])];
        assert!((f.row(0)[0] - f0[0]).abs() < 1e-14);
        // P(S_0 = 0 | S_1 = 1) = f0[0] * xi(0,1) / Σ_i f0[i] xi(i,1)
        let num = f0[0] * 0.1;
        let den = num + f0[1] * 0.8;
        let expected = num / den;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut hits = 0usize;
        let mut total = 0usize;
        for _ in 0..200_000 {
            let s = sample_states(&f, &d, &mut rng);
            if s[1] == 1 {
                total += 1;
                if s[0] == 0 {
                    hits += 1;
                }
            }
        }
        let freq = hits as f64 / total as f64;
        let se = (expected * (1.0 - expected) / total as f64).sqrt();
        assert!((freq - expected).abs() < 4.0 * se, "{freq} vs {expected}");
    }
}
