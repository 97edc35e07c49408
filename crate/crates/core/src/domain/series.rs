use serde::{Deserialize, Serialize};

use super::Quarter;
use crate::error::{Error, Result};

/// Equally spaced quarterly observations of the target variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    start: Quarter,
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(start: Quarter, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("time series is empty"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "non-finite value at {}",
                start + i as i32
            )));
        }
        Ok(TimeSeries { start, values })
    }

    pub fn start(&self) -> Quarter {
        self.start
    }

    /// Last period covered (inclusive).
    pub fn end(&self) -> Quarter {
        self.start + (self.values.len() as i32 - 1)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn period(&self, index: usize) -> Quarter {
        self.start + index as i32
    }

    pub fn get(&self, q: Quarter) -> Option<f64> {
        let i = q - self.start;
        if i < 0 {
            return None;
        }
        self.values.get(i as usize).copied()
    }

    /// Sub-series covering `[from, to]` inclusive.
    pub fn window(&self, from: Quarter, to: Quarter) -> Result<TimeSeries> {
        if from < self.start || to > self.end() || from > to {
            return Err(Error::invalid(format!(
                "window {from}..{to} outside series {}..{}",
                self.start,
                self.end()
            )));
        }
        let a = (from - self.start) as usize;
        let b = (to - self.start) as usize;
        Ok(TimeSeries {
            start: from,
            values: self.values[a..=b].to_vec(),
        })
    }

    /// Copy with every observation strictly after `after` replaced by `f(old)`.
    pub fn map_after(&self, after: Quarter, f: impl Fn(f64) -> f64) -> TimeSeries {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| if self.period(i) > after { f(v) } else { v })
            .collect();
        TimeSeries {
            start: self.start,
            values,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_nan() {
        assert!(TimeSeries::new(Quarter::new(2000, 1), vec![]).is_err());
        assert!(TimeSeries::new(Quarter::new(2000, 1), vec![1.0, f64::NAN]).is_err());
    }

    #[test]
    fn window_is_inclusive() {
        let s = TimeSeries::new(Quarter::new(2000, 1), (0..8).map(f64::from).collect()).unwrap();
        let w = s.window(Quarter::new(2000, 2), Quarter::new(2001, 1)).unwrap();
        assert_eq!(w.values(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(w.end(), Quarter::new(2001, 1));
        assert!(s.window(Quarter::new(1999, 4), Quarter::new(2000, 2)).is_err());
        assert_eq!(s.get(Quarter::new(2001, 4)), Some(7.0));
        assert_eq!(s.get(Quarter::new(2002, 1)), None);
    }
}
