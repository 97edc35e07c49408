//! Linear pooling of view forecasts: fixed weights, Bayesian averaging with given prior
//! view probabilities, and weights or priors chosen to maximise a historical objective.

mod objective;
mod optimize;

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::domain::{flatten_mixture_of_mixtures, ForecastDensity, PoolWeights, Quarter, ViewKind, ViewSpec};
use crate::error::{Error, Result};
use crate::forecaster::ViewForecast;

pub use objective::{ks_statistic, objective, objective_f1, objective_f2, Mode, Objective, PoolHistory, PoolPeriod};
pub use optimize::{
    nelder_mead, optimize_prior, optimize_weights, start_points, NelderMeadResult, Optimum, OptimizerConfig,
};

/// The ordered set of views; fixes the coordinate order of every weight vector in a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewCatalogue {
    views: Vec<ViewSpec>,
}

impl ViewCatalogue {
    pub fn new(views: Vec<ViewSpec>) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::invalid("view catalogue is empty"));
        }
        let mut seen = std::collections::HashSet::new();
        for v in &views {
            v.validate()?;
            if !seen.insert(v.id) {
                return Err(Error::invalid(format!("duplicate view id {}", v.id)));
            }
        }
        Ok(ViewCatalogue { views })
    }

    pub fn views(&self) -> &[ViewSpec] {
        &self.views
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    pub fn ids(&self) -> Vec<u32> {
        self.views.iter().map(|v| v.id).collect()
    }

    pub fn index_of(&self, id: u32) -> Option<usize> {
        self.views.iter().position(|v| v.id == id)
    }

    /// Two-level uniform prior: equal mass for every distinct regime count, split equally
    /// among the views sharing that count.
    pub fn equal_prior(&self) -> PoolWeights {
        let mut per_k: BTreeMap<usize, usize> = BTreeMap::new();
        for v in &self.views {
            *per_k.entry(v.regimes).or_default() += 1;
        }
        let groups = per_k.len() as f64;
        let w = self
            .views
            .iter()
            .map(|v| 1.0 / (groups * per_k[&v.regimes] as f64))
            .collect();
        PoolWeights::normalized(w).expect("positive masses")
    }

    /// Uniform over views, ignoring the regime count.
    pub fn flat_prior(&self) -> PoolWeights {
        PoolWeights::uniform(self.len())
    }

    /// `true` for views centred on supervisory scenarios.
    pub fn scenario_mask(&self) -> Vec<bool> {
        self.views.iter().map(|v| v.kind == ViewKind::Scenario).collect()
    }
}

/// Log marginal likelihoods per origin period, in catalogue order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvidenceTable {
    entries: BTreeMap<Quarter, Vec<f64>>,
}

impl EvidenceTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, origin: Quarter, log_ml: Vec<f64>) {
        self.entries.insert(origin, log_ml);
    }

    pub fn get(&self, origin: Quarter) -> Option<&[f64]> {
        self.entries.get(&origin).map(Vec::as_slice)
    }

    pub fn periods(&self) -> impl Iterator<Item = Quarter> + '_ {
        self.entries.keys().copied()
    }
}

/// Linear pool of aligned view forecasts with outer weights `w`.
pub fn combine_fixed(forecasts: &[ViewForecast], w: &PoolWeights) -> Result<ForecastDensity> {
    if forecasts.len() != w.len() {
        return Err(Error::invalid(format!(
            "{} forecasts for {} weights",
            forecasts.len(),
            w.len()
        )));
    }
    let first = &forecasts[0];
    if forecasts
        .iter()
        .any(|f| f.origin != first.origin || f.horizon != first.horizon)
    {
        return Err(Error::invalid("forecasts are not aligned on one origin period"));
    }
    let parts: Vec<(&ForecastDensity, f64)> = forecasts
        .iter()
        .zip(w.values())
        .map(|(f, &w)| (&f.density, w))
        .collect();
    flatten_mixture_of_mixtures(&parts)
}

/// Posterior view probabilities `π_i ∝ π⁰_i exp(log ML_i)`.
pub fn posterior_from_log_evidence(prior: &PoolWeights, log_ml: &[f64]) -> Result<PoolWeights> {
    if prior.len() != log_ml.len() {
        return Err(Error::invalid("prior and evidence have different lengths"));
    }
    if log_ml.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
        return Err(Error::invalid("evidence contains NaN or +inf"));
    }
    let lw: Vec<f64> = prior
        .values()
        .iter()
        .zip(log_ml)
        .map(|(&p, &l)| if p > 0.0 { p.ln() + l } else { f64::NEG_INFINITY })
        .collect();
    let m = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return Err(Error::NoEvidence);
    }
    let w: Vec<f64> = lw.iter().map(|v| (v - m).exp()).collect();
    PoolWeights::normalized(w)
}

pub fn posterior_probs(prior: &PoolWeights, evidence: &EvidenceTable, origin: Quarter) -> Result<PoolWeights> {
    let log_ml = evidence
        .get(origin)
        .ok_or_else(|| Error::invalid(format!("no evidence for origin {origin}")))?;
    posterior_from_log_evidence(prior, log_ml)
}

/// One row of a weight or prior trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub period: Quarter,
    pub weights: PoolWeights,
    pub tag: String,
}

/// Writes `period,view_id,value,objective_tag` rows.
pub fn write_trajectories<W: Write>(w: W, ids: &[u32], rows: &[TrajectoryPoint]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["period", "view_id", "value", "objective_tag"])?;
    for r in rows {
        for (id, v) in ids.iter().zip(r.weights.values()) {
            wtr.write_record([r.period.to_string(), id.to_string(), v.to_string(), r.tag.clone()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::views::default_catalogue;

    #[test]
    fn two_level_prior_on_builtin_catalogue() {
        let cat = ViewCatalogue::new(default_catalogue()).unwrap();
        let p = cat.equal_prior();
        let v = p.values();
        for (view, &w) in cat.views().iter().zip(v) {
            let want = match view.regimes {
                1 | 2 | 4 => 0.2,
                _ => 0.04,
            };
            assert!((w - want).abs() < 1e-15, "view {}: {w}", view.id);
        }
        assert_eq!(cat.scenario_mask().iter().filter(|m| **m).count(), 8);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let mut v = crate::views::build_vague_views(2, 1);
        v[1].id = 1;
        assert!(ViewCatalogue::new(v).is_err());
    }

    #[test]
    fn posterior_examples() {
        let prior = PoolWeights::uniform(2);
        let p = posterior_from_log_evidence(&prior, &[0.0, 2.0]).unwrap();
        assert!((p.values()[0] - 0.119_202_922_022_117_6).abs() < 1e-12);
        assert!((p.values()[1] - 0.880_797_077_977_882_3).abs() < 1e-12);

        let eq = posterior_from_log_evidence(&PoolWeights::new(vec![0.3, 0.7]).unwrap(), &[-5.0, -5.0]).unwrap();
        assert!((eq.values()[0] - 0.3).abs() < 1e-15);

        let hot = posterior_from_log_evidence(&PoolWeights::one_hot(3, 1), &[50.0, -50.0, 0.0]).unwrap();
        assert_eq!(hot.values(), &[0.0, 1.0, 0.0]);

        let shifted = posterior_from_log_evidence(&prior, &[1000.0, 1002.0]).unwrap();
        assert!((shifted.values()[1] - p.values()[1]).abs() < 1e-15);

        let err = posterior_from_log_evidence(&PoolWeights::one_hot(2, 0), &[f64::NEG_INFINITY, 0.0]);
        assert!(matches!(err, Err(Error::NoEvidence)));
    }

    #[test]
    fn combine_fixed_one_hot_and_linearity() {
        let q = Quarter::new(2000, 1);
        let mk = |id, m, v| ViewForecast {
            view_id: id,
            density: ForecastDensity::single(m, v, q + 1).unwrap(),
            origin: q,
            horizon: 1,
        };
        let fs = vec![mk(1, 0.0, 1.0), mk(2, 1.0, 2.0), mk(3, -1.0, 0.5)];
        let hot = combine_fixed(&fs, &PoolWeights::one_hot(3, 1)).unwrap();
        for y in [-2.0, 0.0, 0.3, 4.0] {
            assert_eq!(hot.pdf(y), fs[1].density.pdf(y));
        }
        let w = PoolWeights::new(vec![0.2, 0.5, 0.3]).unwrap();
        let pooled = combine_fixed(&fs, &w).unwrap();
        for i in 0..50 {
            let y = -4.0 + 8.0 * i as f64 / 49.0;
            let want: f64 = fs.iter().zip(w.values()).map(|(f, w)| w * f.density.pdf(y)).sum();
            assert!((pooled.pdf(y) - want).abs() < 1e-15);
        }
        let mut bad = fs.clone();
        bad[2].origin = q + 1;
        assert!(combine_fixed(&bad, &w).is_err());
    }

    #[test]
    fn trajectory_csv() {
        let mut buf = Vec::new();
        let rows = vec![TrajectoryPoint {
            period: Quarter::new(1978, 1),
            weights: PoolWeights::new(vec![0.25, 0.75]).unwrap(),
            tag: "w1".into(),
        }];
        write_trajectories(&mut buf, &[1, 6], &rows).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "period,view_id,value,objective_tag\n1978Q1,1,0.25,w1\n1978Q1,6,0.75,w1\n"
        );
    }
}
