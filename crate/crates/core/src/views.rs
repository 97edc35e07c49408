//! Construction of the view catalogue: diffuse views for each regime count and views whose
//! regime intercepts are centred on supervisory stress-test scenarios.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::domain::{Quarter, ViewKind, ViewSpec};
use crate::error::{Error, Result};

const BUNDLED_SCENARIOS: &str = include_str!("../data/fed_scenarios.csv");

pub const VARIANCE_SHAPE: f64 = 3.0;
pub const HYPER_SHAPE: f64 = 0.5;
pub const HYPER_RATE: f64 = 0.5;
pub const STAY_PRIOR: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Baseline,
    Adverse,
    SeverelyAdverse,
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Baseline => "baseline",
            Scenario::Adverse => "adverse",
            Scenario::SeverelyAdverse => "severely_adverse",
        })
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "baseline" | "base" => Ok(Scenario::Baseline),
            "adverse" | "adv" => Ok(Scenario::Adverse),
            "severely_adverse" | "severely adverse" | "sev" => Ok(Scenario::SeverelyAdverse),
            other => Err(Error::invalid(format!("unknown scenario {other:?}"))),
        }
    }
}

/// Quarterly annualised growth paths per stress-test year and scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTable {
    paths: BTreeMap<(i32, Scenario), Vec<(Quarter, f64)>>,
}

#[derive(Deserialize)]
struct ScenarioRow {
    test_year: i32,
    scenario: String,
    period: String,
    growth: f64,
}

impl ScenarioTable {
    /// The 2015-2018 supervisory scenarios shipped with the crate.
    pub fn bundled() -> Self {
        ScenarioTable::from_csv(BUNDLED_SCENARIOS.as_bytes()).expect("bundled scenarios parse")
    }

    /// Reads `test_year,scenario,period,growth` rows.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut paths: BTreeMap<(i32, Scenario), Vec<(Quarter, f64)>> = BTreeMap::new();
        for (i, rec) in rdr.deserialize::<ScenarioRow>().enumerate() {
            let row = i + 2;
            let rec = rec.map_err(|e| Error::Parse {
                row,
                message: e.to_string(),
            })?;
            let scenario: Scenario = rec.scenario.parse().map_err(|e: Error| Error::Parse {
                row,
                message: e.to_string(),
            })?;
            let q = Quarter::parse(&rec.period).map_err(|e| Error::Parse {
                row,
                message: e.to_string(),
            })?;
            if !rec.growth.is_finite() {
                return Err(Error::Parse {
                    row,
                    message: "non-finite growth".into(),
                });
            }
            paths.entry((rec.test_year, scenario)).or_default().push((q, rec.growth));
        }
        for ((year, scen), path) in &mut paths {
            path.sort_by_key(|(q, _)| *q);
            if path.windows(2).any(|w| w[1].0 - w[0].0 != 1) {
                return Err(Error::invalid(format!(
                    "{year} {scen} scenario is not a consecutive quarterly path"
                )));
            }
        }
        Ok(ScenarioTable { paths })
    }

    pub fn years(&self) -> Vec<i32> {
        let mut y: Vec<i32> = self.paths.keys().map(|(y, _)| *y).collect();
        y.dedup();
        y
    }

    pub fn path(&self, year: i32, scenario: Scenario) -> Option<&[(Quarter, f64)]> {
        self.paths.get(&(year, scenario)).map(Vec::as_slice)
    }

    fn segment_mean(&self, year: i32, scenario: Scenario, first: bool) -> Result<f64> {
        let path = self
            .path(year, scenario)
            .ok_or_else(|| Error::invalid(format!("no {scenario} scenario for {year}")))?;
        if path.len() < 4 {
            return Err(Error::invalid(format!(
                "{year} {scenario} scenario has {} quarters, need at least 4",
                path.len()
            )));
        }
        let seg = if first {
            &path[..4]
        } else {
            &path[path.len() - 4..]
        };
        Ok(seg.iter().map(|(_, v)| v).sum::<f64>() / 4.0)
    }

    /// Regime targets for a test year: `(baseline last 4, adverse first 4, severe first 4,
    /// adverse last 4, severe last 4)` quarter averages.
    pub fn regime_targets(&self, year: i32) -> Result<[f64; 5]> {
        Ok([
            self.segment_mean(year, Scenario::Baseline, false)?,
            self.segment_mean(year, Scenario::Adverse, true)?,
            self.segment_mean(year, Scenario::SeverelyAdverse, true)?,
            self.segment_mean(year, Scenario::Adverse, false)?,
            self.segment_mean(year, Scenario::SeverelyAdverse, false)?,
        ])
    }
}

/// Dirichlet hyperparameters with `STAY_PRIOR` on the diagonal and `1/(K-1)` elsewhere.
pub fn transition_prior(k: usize) -> Vec<Vec<f64>> {
    (0..k)
        .map(|i| {
            (0..k)
                .map(|j| {
                    if i == j {
                        STAY_PRIOR
                    } else {
                        1.0 / (k as f64 - 1.0)
                    }
                })
                .collect()
        })
        .collect()
}

/// Diffuse views for `K = 1..=k_max`, ids `1..=k_max`.
pub fn build_vague_views(k_max: usize, lags: usize) -> Vec<ViewSpec> {
    let mut ar_mean = vec![0.0; lags];
    if lags > 0 {
        ar_mean[0] = 0.5;
    }
    (1..=k_max)
        .map(|k| ViewSpec {
            id: k as u32,
            kind: ViewKind::Vague,
            regimes: k,
            lags,
            intercept_mean: vec![0.0; k],
            intercept_var: vec![1.0; k],
            ar_mean: ar_mean.clone(),
            ar_var: vec![1.0; lags],
            variance_shape: VARIANCE_SHAPE,
            hyper_shape: HYPER_SHAPE,
            hyper_rate: HYPER_RATE,
            transition_prior: transition_prior(k),
        })
        .collect()
}

/// Scenario-centred views: for every test year a three-regime view (normal, adverse,
/// severely adverse) and a five-regime view that adds the two recovery regimes in front.
/// Intercept prior means are chosen so the regime's unconditional mean
/// `b / (1 - Σ a)` equals the scenario target. Ids are assigned from `first_id`, all
/// three-regime views first.
pub fn build_fed_views(
    table: &ScenarioTable,
    ar_mean: &[f64],
    tight_var: f64,
    first_id: u32,
) -> Result<Vec<ViewSpec>> {
    let persistence: f64 = ar_mean.iter().sum();
    if (1.0 - persistence).abs() < 1e-12 {
        return Err(Error::invalid("AR prior means sum to one; regime means are undefined"));
    }
    if !(tight_var > 0.0) {
        return Err(Error::invalid("prior variance must be positive"));
    }
    let scale = 1.0 - persistence;
    let years = table.years();
    let mut out = Vec::new();
    let mut id = first_id;
    for regimes in [3usize, 5] {
        for &year in &years {
            let [base, adv, sev, adv_rec, sev_rec] = table.regime_targets(year)?;
            let targets: Vec<f64> = if regimes == 3 {
                vec![base, adv, sev]
            } else {
                vec![sev_rec, adv_rec, base, adv, sev]
            };
            out.push(ViewSpec {
                id,
                kind: ViewKind::Scenario,
                regimes,
                lags: ar_mean.len(),
                intercept_mean: targets.iter().map(|m| m * scale).collect(),
                intercept_var: vec![tight_var; regimes],
                ar_mean: ar_mean.to_vec(),
                ar_var: vec![tight_var; ar_mean.len()],
                variance_shape: VARIANCE_SHAPE,
                hyper_shape: HYPER_SHAPE,
                hyper_rate: HYPER_RATE,
                transition_prior: transition_prior(regimes),
            });
            id += 1;
        }
    }
    Ok(out)
}

/// The thirteen-view catalogue: five vague views (K = 1..5) and eight scenario views built
/// from the bundled stress tests with AR prior mean `(0.9, 0, 0, 0, 0)` and variance 1e-5.
pub fn default_catalogue() -> Vec<ViewSpec> {
    let mut views = build_vague_views(5, 5);
    let ar = [0.9, 0.0, 0.0, 0.0, 0.0];
    views.extend(
        build_fed_views(&ScenarioTable::bundled(), &ar, 1e-5, 6).expect("bundled table is valid"),
    );
    views
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_table_shape() {
        let t = ScenarioTable::bundled();
        assert_eq!(t.years(), vec![2015, 2016, 2017, 2018]);
        for y in t.years() {
            for s in [Scenario::Baseline, Scenario::Adverse, Scenario::SeverelyAdverse] {
                assert_eq!(t.path(y, s).unwrap().len(), 13);
            }
        }
    }

    #[test]
    fn vague_views() {
        let v = build_vague_views(5, 5);
        assert_eq!(v.len(), 5);
        assert_eq!(v[0].transition_prior, vec![vec![2.0]]);
        assert_eq!(v[2].transition_prior[0][1], 0.5);
        assert_eq!(v[4].ar_mean, vec![0.5, 0.0, 0.0, 0.0, 0.0]);
        for view in &v {
            view.validate().unwrap();
        }
        // prior probability of staying is 2/3 for every K > 1
        for view in &v[1..] {
            let row = &view.transition_prior[0];
            assert!((row[0] / row.iter().sum::<f64>() - 2.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn catalogue_has_thirteen_views() {
        let c = default_catalogue();
        assert_eq!(c.len(), 13);
        let ids: Vec<u32> = c.iter().map(|v| v.id).collect();
        assert_eq!(ids, (1..=13).collect::<Vec<_>>());
    }

    #[test]
    fn short_scenario_is_rejected() {
        let csv = "test_year,scenario,period,growth\n\
                   2020,baseline,2020Q1,1\n2020,baseline,2020Q2,1\n2020,baseline,2020Q3,1\n\
                   2020,adverse,2020Q1,1\n2020,adverse,2020Q2,1\n2020,adverse,2020Q3,1\n2020,adverse,2020Q4,1\n\
                   2020,severely_adverse,2020Q1,1\n2020,severely_adverse,2020Q2,1\n\
                   2020,severely_adverse,2020Q3,1\n2020,severely_adverse,2020Q4,1\n";
        let t = ScenarioTable::from_csv(csv.as_bytes()).unwrap();
        assert!(build_fed_views(&t, &[0.9], 1e-5, 1).is_err());
    }

    #[test]
    fn unit_root_prior_is_rejected() {
        assert!(build_fed_views(&ScenarioTable::bundled(), &[0.6, 0.4], 1e-5, 6).is_err());
    }
}
