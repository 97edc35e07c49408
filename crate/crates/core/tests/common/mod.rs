//! Shared helpers for the integration tests: simulation from known MSAR processes.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use viewpool::domain::{MsarDraw, Quarter, TimeSeries, TransitionMatrix, ViewSpec};
use viewpool::math::stationary_distribution;
use viewpool::views::build_vague_views;

/// Parameters of a data-generating process.
#[derive(Debug, Clone)]
pub struct Dgp {
    pub beta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub sigma2: Vec<f64>,
    /// Row-major transition matrix.
    pub xi: Vec<f64>,
}

impl Dgp {
    pub fn regimes(&self) -> usize {
        self.beta.len()
    }

    pub fn draw(&self, states: Vec<u8>) -> MsarDraw {
        let k = self.regimes();
        MsarDraw {
            beta: self.beta.clone(),
            alpha: self.alpha.clone(),
            sigma2: self.sigma2.clone(),
            xi: TransitionMatrix::new(k, self.xi.clone()).unwrap(),
            states,
            c0: 1.0,
        }
    }

    /// Simulates `n` observations (the first `p` are presample values of the process
    /// itself), discarding `burn` leading periods. Also returns the regime path of the
    /// retained sample.
    pub fn simulate_with_states(&self, n: usize, burn: usize, seed: u64) -> (TimeSeries, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = self.regimes();
        let p = self.alpha.len();
        let pi = stationary_distribution(k, &self.xi).unwrap();
        let mut s = categorical(&pi, &mut rng);
        let mean = {
            let m: f64 = (0..k).map(|r| pi[r] * self.beta[r]).sum();
            m / (1.0 - self.alpha.iter().sum::<f64>())
        };
        let mut y = vec![mean; p];
        let mut states = Vec::new();
        for _ in 0..burn + n {
            let ar: f64 = (0..p).map(|j| self.alpha[j] * y[y.len() - 1 - j]).sum();
            let e: f64 = StandardNormal.sample(&mut rng);
            y.push(self.beta[s] + ar + self.sigma2[s].sqrt() * e);
            states.push(s as u8);
            s = categorical(&self.xi[s * k..(s + 1) * k], &mut rng);
        }
        let y = y[p + burn..].to_vec();
        let states = states[burn..].to_vec();
        (TimeSeries::new(Quarter::new(1950, 1), y).unwrap(), states)
    }

    pub fn simulate(&self, n: usize, seed: u64) -> TimeSeries {
        self.simulate_with_states(n, 100, seed).0
    }
}

pub fn categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// A persistent two-regime process with distinct means and variances.
pub fn two_regime_dgp() -> Dgp {
    Dgp {
        beta: vec![1.0, -1.0],
        alpha: vec![0.5],
        sigma2: vec![0.25, 1.0],
        xi: vec![0.9, 0.1, 0.15, 0.85],
    }
}

/// Vague view with `k` regimes and `p` lags.
pub fn vague_view(k: usize, p: usize) -> ViewSpec {
    let mut v = build_vague_views(k, p).pop().unwrap();
    v.id = k as u32;
    v
}

pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}
