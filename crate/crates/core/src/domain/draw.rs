use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::stationary_distribution;

/// Row-stochastic `k x k` matrix, row-major. Entry `(i, j)` is `P(S_{t+1} = j | S_t = i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMatrix {
    k: usize,
    data: Vec<f64>,
}

impl TransitionMatrix {
    pub fn new(k: usize, data: Vec<f64>) -> Result<Self> {
        if k == 0 || data.len() != k * k {
            return Err(Error::invalid(format!(
                "transition matrix needs {k}x{k} entries, got {}",
                data.len()
            )));
        }
        for i in 0..k {
            let row = &data[i * k..(i + 1) * k];
            if row.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::invalid(format!("row {i} has entries outside [0,1]")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::invalid(format!("row {i} sums to {s}")));
            }
        }
        Ok(TransitionMatrix { k, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.len();
        TransitionMatrix::new(k, rows.iter().flatten().copied().collect())
    }

    pub fn identity(k: usize) -> Self {
        let mut data = vec![0.0; k * k];
        for i in 0..k {
            data[i * k + i] = 1.0;
        }
        TransitionMatrix { k, data }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.data[from * self.k + to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.data[from * self.k..(from + 1) * self.k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Stationary distribution, or uniform when the chain has no unique positive one.
    pub fn initial_distribution(&self) -> Vec<f64> {
        stationary_distribution(self.k, &self.data)
            .unwrap_or_else(|| vec![1.0 / self.k as f64; self.k])
    }

    /// Relabel: new regime `i` is old regime `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> TransitionMatrix {
        let k = self.k;
        let mut data = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                data[i * k + j] = self.get(perm[i], perm[j]);
            }
        }
        TransitionMatrix { k, data }
    }
}

/// One MCMC draw of the Markov-switching AR parameters and the regime path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsarDraw {
    pub beta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub xi: TransitionMatrix,
    /// Zero-based regime labels for the usable sample (observations after the first `p`).
    pub states: Vec<u8>,
    pub c0: f64,
}

impl MsarDraw {
    pub fn regimes(&self) -> usize {
        self.beta.len()
    }

    pub fn lags(&self) -> usize {
        self.alpha.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.beta.len();
        if self.sigma2.len() != k || self.xi.k() != k {
            return Err(Error::invalid("draw dimensions disagree"));
        }
        if self.sigma2.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::invalid("sigma2 must be positive"));
        }
        if let Some(&s) = self.states.iter().find(|&&s| s as usize >= k) {
            return Err(Error::invalid(format!("state label {s} outside 0..{k}")));
        }
        Ok(())
    }

    /// Relabel regimes: new regime `i` takes the parameters of old regime `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> MsarDraw {
        let k = perm.len();
        let mut inverse = vec![0u8; k];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new as u8;
        }
        MsarDraw {
            beta: perm.iter().map(|&o| self.beta[o]).collect(),
            alpha: self.alpha.clone(),
            sigma2: perm.iter().map(|&o| self.sigma2[o]).collect(),
            xi: self.xi.permuted(perm),
            states: self.states.iter().map(|&s| inverse[s as usize]).collect(),
            c0: self.c0,
        }
    }

    /// Regime order by descending intercept, used only for reporting summaries.
    pub fn reporting_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.beta.len()).collect();
        order.sort_by(|&a, &b| self.beta[b].total_cmp(&self.beta[a]));
        order
    }
}
