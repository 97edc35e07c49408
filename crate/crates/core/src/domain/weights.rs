use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point on the probability simplex over the view catalogue. Used both as combination
/// weights and as prior view probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolWeights(Vec<f64>);

impl PoolWeights {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("weights vector is empty"));
        }
        if values.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::invalid(format!("weights must be nonnegative: {values:?}")));
        }
        let s: f64 = values.iter().sum();
        if (s - 1.0).abs() > 1e-10 {
            return Err(Error::invalid(format!("weights sum to {s}")));
        }
        Ok(PoolWeights(values))
    }

    /// Rescales nonnegative values onto the simplex.
    pub fn normalized(values: Vec<f64>) -> Result<Self> {
        let s: f64 = values.iter().sum();
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::invalid("weights have no positive mass"));
        }
        PoolWeights::new(values.into_iter().map(|v| v / s).collect())
    }

    pub fn uniform(n: usize) -> Self {
        PoolWeights(vec![1.0 / n as f64; n])
    }

    pub fn one_hot(n: usize, index: usize) -> Self {
        let mut v = vec![0.0; n];
        v[index] = 1.0;
        PoolWeights(v)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Zeroes entries below `threshold` and renormalises.
    pub fn truncated(&self, threshold: f64) -> PoolWeights {
        let v: Vec<f64> = self
            .0
            .iter()
            .map(|&w| if w < threshold { 0.0 } else { w })
            .collect();
        PoolWeights::normalized(v).unwrap_or_else(|_| self.clone())
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert!(PoolWeights::new(vec![0.5, 0.5]).is_ok());
        assert!(PoolWeights::new(vec![0.5, 0.4]).is_err());
        assert!(PoolWeights::new(vec![1.5, -0.5]).is_err());
        assert!(PoolWeights::normalized(vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn truncation_renormalises() {
        let w = PoolWeights::new(vec![1e-12, 0.5 - 1e-12, 0.5]).unwrap().truncated(1e-10);
        assert_eq!(w.values()[0], 0.0);
        assert!((w.values().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
