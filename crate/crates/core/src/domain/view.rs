use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViewKind {
    Vague,
    Scenario,
}

/// One prior configuration of the Markov-switching AR model: the regime count plus every
/// hyperparameter of the independence prior.
///
/// Priors: `beta_k ~ N(intercept_mean[k], intercept_var[k])`,
/// `alpha_j ~ N(ar_mean[j], ar_var[j])`, `sigma2_k | C0 ~ IG(variance_shape, C0)`,
/// `C0 ~ Gamma(hyper_shape, hyper_rate)` and row `k` of the transition matrix
/// `~ Dirichlet(transition_prior[k])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewSpec {
    pub id: u32,
    pub kind: ViewKind,
    pub regimes: usize,
    pub lags: usize,
    pub intercept_mean: Vec<f64>,
    pub intercept_var: Vec<f64>,
    pub ar_mean: Vec<f64>,
    pub ar_var: Vec<f64>,
    pub variance_shape: f64,
    pub hyper_shape: f64,
    pub hyper_rate: f64,
    /// Row-major `regimes x regimes` Dirichlet hyperparameters.
    pub transition_prior: Vec<Vec<f64>>,
}

impl ViewSpec {
    pub fn validate(&self) -> Result<()> {
        let k = self.regimes;
        let p = self.lags;
        let bad = |m: String| Err(Error::invalid(format!("view {}: {m}", self.id)));
        if k == 0 {
            return bad("regime count must be >= 1".into());
        }
        if self.intercept_mean.len() != k || self.intercept_var.len() != k {
            return bad(format!("intercept hyperparameters must have length {k}"));
        }
        if self.ar_mean.len() != p || self.ar_var.len() != p {
            return bad(format!("AR hyperparameters must have length {p}"));
        }
        if self.intercept_mean.iter().chain(&self.ar_mean).any(|v| !v.is_finite()) {
            return bad("prior means must be finite".into());
        }
        if self
            .intercept_var
            .iter()
            .chain(&self.ar_var)
            .any(|&v| !(v > 0.0 && v.is_finite()))
        {
            return bad("prior variances must be positive and finite".into());
        }
        if !(self.variance_shape > 2.0) {
            return bad(format!("c0 must exceed 2, got {}", self.variance_shape));
        }
        if !(self.hyper_shape > 0.0 && self.hyper_rate > 0.0) {
            return bad("g0 and G0 must be positive".into());
        }
        if self.transition_prior.len() != k
            || self.transition_prior.iter().any(|r| r.len() != k)
        {
            return bad(format!("transition prior must be {k}x{k}"));
        }
        if self
            .transition_prior
            .iter()
            .flatten()
            .any(|&v| !(v > 0.0 && v.is_finite()))
        {
            return bad("transition prior entries must be positive".into());
        }
        Ok(())
    }

    /// Regime relabelings that leave the prior unchanged. Always contains the identity
    /// first. Only enumerated for up to 7 regimes; larger views report the identity alone.
    pub fn label_symmetries(&self) -> Vec<Vec<usize>> {
        let k = self.regimes;
        let identity: Vec<usize> = (0..k).collect();
        if k > 7 {
            return vec![identity];
        }
        let mut out = Vec::new();
        for perm in permutations(k) {
            let invariant = (0..k).all(|i| {
                let pi = perm[i];
                self.intercept_mean[pi] == self.intercept_mean[i]
                    && self.intercept_var[pi] == self.intercept_var[i]
                    && (0..k).all(|j| {
                        self.transition_prior[pi][perm[j]] == self.transition_prior[i][j]
                    })
            });
            if invariant {
                out.push(perm);
            }
        }
        // identity is the first permutation produced in lexicographic order
        debug_assert_eq!(out[0], identity);
        out
    }
}

/// All permutations of `0..n` in lexicographic order.
pub(crate) fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    loop {
        out.push(cur.clone());
        // next lexicographic permutation
        let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else {
            break;
        };
        let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
    out
}
