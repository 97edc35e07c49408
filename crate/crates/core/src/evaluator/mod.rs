//! Recursive out-of-sample backtest of pooled view forecasts and their evaluation.
//!
//! Timeline for a plan `(t0, T0, T̄, R, h)`:
//!
//! * every view is estimated on `[t0, o]` for each origin `o ∈ [T0, T̄ + h]` and forecasts
//!   `o + h`;
//! * at each decision date `T_w ∈ [T0 + h + R − 1, T̄ + h]` weights (or priors) are chosen
//!   from the `R` most recent forecasts whose outcomes are already known, i.e. origins
//!   `T_w − h − R + 1 ..= T_w − h`, and applied to the forecasts made at `T_w`;
//! * the pooled forecasts are scored on the targets `T_w + h ∈ [T0 + 2h + R − 1, T̄ + 2h]`,
//!   which gives `T̄ − T0 − R + 2` evaluation periods.

mod benchmark;
mod cache;
mod report;
mod stats;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{PoolWeights, Quarter, TimeSeries, ViewSpec};
use crate::error::{Error, Result};
use crate::forecaster::{floor_log_score, forecast_view_with, DensityMode, ViewForecast};
use crate::pooler::{
    combine_fixed, optimize_prior, optimize_weights, posterior_from_log_evidence, Objective,
    OptimizerConfig, PoolHistory, PoolPeriod, ViewCatalogue,
};
use crate::sampler::{log_marginal_likelihood_with, run_gibbs, BridgeConfig, SamplerConfig};
use crate::views::build_vague_views;

pub use benchmark::{ar_benchmark, Scheme};
pub use cache::{cache_key, window_seed, DiskCache, WindowResult};
pub use report::{read_report, write_fan_csv, write_report, write_scores_csv, write_summary_csv, write_weights_csv};
pub use stats::{apd, kolmogorov_survival, ks_test, ljung_box, Moment, TestResult};

/// Percentile levels of the fan-chart output.
pub const FAN_LEVELS: [f64; 21] = [
    0.01, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45, 0.50, 0.55, 0.60, 0.65, 0.70,
    0.75, 0.80, 0.85, 0.90, 0.95, 0.99,
];

/// Number of autocorrelations in the Ljung–Box tests.
pub const LB_LAGS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    EqualWeights,
    EqualPriors,
    MaxMl,
    W1,
    W2,
    Pi1,
    Pi2,
    ArRecursive,
    ArRolling,
}

impl Method {
    pub const ALL: [Method; 9] = [
        Method::EqualWeights,
        Method::EqualPriors,
        Method::MaxMl,
        Method::W1,
        Method::W2,
        Method::Pi1,
        Method::Pi2,
        Method::ArRecursive,
        Method::ArRolling,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Method::EqualWeights => "equal-weights",
            Method::EqualPriors => "equal-priors",
            Method::MaxMl => "max-ml",
            Method::W1 => "w1",
            Method::W2 => "w2",
            Method::Pi1 => "pi1",
            Method::Pi2 => "pi2",
            Method::ArRecursive => "ar-recursive",
            Method::ArRolling => "ar-rolling",
        }
    }

    pub fn needs_evidence(self) -> bool {
        matches!(self, Method::EqualPriors | Method::MaxMl | Method::Pi1 | Method::Pi2)
    }

    pub fn is_pool(self) -> bool {
        !matches!(self, Method::ArRecursive | Method::ArRolling)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase().replace(['*', '_'], "").replace('π', "pi");
        Method::ALL
            .into_iter()
            .find(|m| m.tag().replace('-', "") == t.replace('-', ""))
            .ok_or_else(|| Error::invalid(format!("unknown method {s:?}")))
    }
}

/// Everything fixed across the windows of a run.
#[derive(Debug, Clone)]
pub struct EstimationContext {
    /// Sampler settings; `seed` is the base seed from which window seeds are derived.
    pub sampler: SamplerConfig,
    pub bridge: BridgeConfig,
    pub horizon: usize,
    pub density: DensityMode,
    pub cache: Option<DiskCache>,
}

/// Estimates `view` on `[start, end]` and forecasts `end + h`, using the cache when possible.
pub fn estimate_window(
    y: &TimeSeries,
    view: &ViewSpec,
    start: Quarter,
    end: Quarter,
    ctx: &EstimationContext,
    need_evidence: bool,
) -> Result<WindowResult> {
    let wrap = |e: Error| Error::Window {
        view_id: view.id,
        start,
        end,
        source: Box::new(e),
    };
    let window = y.window(start, end).map_err(wrap)?;
    let cfg = SamplerConfig {
        seed: window_seed(ctx.sampler.seed, view.id, start, end),
        ..ctx.sampler
    };
    let key = cache_key(view, start, end, window.values(), &cfg, &ctx.bridge, ctx.horizon, ctx.density);
    if let Some(hit) = ctx.cache.as_ref().and_then(|c| c.get(&key)) {
        if hit.log_ml.is_some() || !need_evidence {
            return Ok(hit);
        }
    }
    let compute = || -> Result<WindowResult> {
        let draws = run_gibbs(&window, view, &cfg)?;
        let forecast = forecast_view_with(&window, &draws, ctx.horizon, ctx.density)?;
        let log_ml = if need_evidence {
            Some(log_marginal_likelihood_with(&window, view, &draws, &ctx.bridge)?.log_ml)
        } else {
            None
        };
        Ok(WindowResult { forecast, log_ml })
    };
    let result = compute().map_err(wrap)?;
    if let Some(c) = &ctx.cache {
        if let Err(e) = c.put(&key, &result) {
            log::warn!("could not write cache entry: {e}");
        }
    }
    Ok(result)
}

#[derive(Debug, Clone)]
pub struct BacktestPlan {
    /// Sample start; every recursive window begins here.
    pub t0: Quarter,
    /// End of the shortest estimation window.
    pub first_end: Quarter,
    /// End of the longest window used for scoring.
    pub last_end: Quarter,
    /// Length of the weight-optimisation window.
    pub window: usize,
    pub horizon: usize,
    pub catalogue: ViewCatalogue,
    pub sampler: SamplerConfig,
    pub bridge: BridgeConfig,
    pub optimizer: OptimizerConfig,
    pub methods: Vec<Method>,
    /// Window width of the rolling AR benchmark.
    pub rolling_width: usize,
    /// Lag order of the AR benchmarks.
    pub ar_lags: usize,
    /// Use a prior uniform over views instead of uniform over regime counts.
    pub flat_equal_prior: bool,
    /// Methods whose pooled densities are summarised by percentiles.
    pub fan_methods: Vec<Method>,
    /// How each view's draws become a predictive density.
    pub density: DensityMode,
}

impl BacktestPlan {
    pub fn new(
        t0: Quarter,
        first_end: Quarter,
        last_end: Quarter,
        window: usize,
        horizon: usize,
        catalogue: ViewCatalogue,
    ) -> Self {
        BacktestPlan {
            t0,
            first_end,
            last_end,
            window,
            horizon,
            catalogue,
            sampler: SamplerConfig::default(),
            bridge: BridgeConfig::default(),
            optimizer: OptimizerConfig::default(),
            methods: Method::ALL.to_vec(),
            rolling_width: 80,
            ar_lags: 5,
            flat_equal_prior: false,
            fan_methods: vec![Method::Pi2],
            density: DensityMode::Mixture,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t0 < self.first_end && self.first_end < self.last_end) {
            return Err(Error::invalid("plan needs t0 < T0 < Tbar"));
        }
        if self.window == 0 || self.horizon == 0 {
            return Err(Error::invalid("optimisation window and horizon must be positive"));
        }
        if self.evaluation_len() < 1 {
            return Err(Error::invalid(format!(
                "evaluation sample is empty: R = {} exceeds Tbar - T0 + 1 = {}",
                self.window,
                self.last_end - self.first_end + 1
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::invalid("no methods to evaluate"));
        }
        if self.window < 5 && self.methods.iter().any(|m| matches!(m, Method::W2 | Method::Pi2)) {
            log::warn!("KS-based optimisation over fewer than 5 periods is unreliable");
        }
        self.sampler.validate()
    }

    /// Decision dates `T_w`, which are also the origins of the evaluated forecasts.
    pub fn decision_dates(&self) -> Vec<Quarter> {
        let h = self.horizon as i32;
        let first = self.first_end + h + self.window as i32 - 1;
        let last = self.last_end + h;
        (first.index()..=last.index()).map(Quarter::from_index).collect()
    }

    /// Origins at which every view is estimated.
    pub fn origins(&self) -> Vec<Quarter> {
        let last = self.last_end + self.horizon as i32;
        (self.first_end.index()..=last.index()).map(Quarter::from_index).collect()
    }

    /// First and last evaluated target period.
    pub fn evaluation_sample(&self) -> (Quarter, Quarter) {
        let h = self.horizon as i32;
        (
            self.first_end + 2 * h + self.window as i32 - 1,
            self.last_end + 2 * h,
        )
    }

    pub fn evaluation_len(&self) -> i32 {
        self.last_end - self.first_end - self.window as i32 + 2
    }

    fn equal_prior(&self) -> PoolWeights {
        if self.flat_equal_prior {
            self.catalogue.flat_prior()
        } else {
            self.catalogue.equal_prior()
        }
    }

    fn ar_view(&self) -> ViewSpec {
        build_vague_views(1, self.ar_lags).pop().expect("one view")
    }
}

/// Outcome of one method in one evaluation period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodRecord {
    pub origin: Quarter,
    pub target: Quarter,
    pub realized: f64,
    pub pit: f64,
    pub log_score: f64,
    pub floored: bool,
    pub mean: f64,
    /// Pooling weights applied to the views (pooled methods only).
    pub weights: Option<Vec<f64>>,
    /// The optimised prior for prior-based methods.
    pub prior: Option<Vec<f64>>,
    pub objective_value: Option<f64>,
    pub percentiles: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub apd: f64,
    pub ks: TestResult,
    pub lb1: Option<TestResult>,
    pub lb2: Option<TestResult>,
    pub floored_scores: usize,
    pub periods: usize,
}

impl MethodSummary {
    pub fn from_records(records: &[PeriodRecord]) -> Result<Self> {
        let pits: Vec<f64> = records.iter().map(|r| r.pit).collect();
        let scores: Vec<f64> = records.iter().map(|r| r.log_score).collect();
        let lb = |m| match ljung_box(&pits, m, LB_LAGS) {
            Ok(r) => Some(r),
            Err(e) => {
                log::debug!("Ljung-Box test skipped: {e}");
                None
            }
        };
        Ok(MethodSummary {
            apd: apd(&scores)?,
            ks: ks_test(&pits)?,
            lb1: lb(Moment::First),
            lb2: lb(Moment::Second),
            floored_scores: records.iter().filter(|r| r.floored).count(),
            periods: records.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    pub periods: Vec<PeriodRecord>,
    pub summary: MethodSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub t0: Quarter,
    pub first_end: Quarter,
    pub last_end: Quarter,
    pub window: usize,
    pub horizon: usize,
    pub seed: u64,
    pub view_ids: Vec<u32>,
    pub scenario_views: Vec<bool>,
    pub fan_levels: Vec<f64>,
    pub methods: Vec<MethodResult>,
}

impl EvaluationReport {
    pub fn method(&self, m: Method) -> Option<&MethodResult> {
        self.methods.iter().find(|r| r.method == m)
    }

    pub fn evaluation_sample(&self) -> Option<(Quarter, Quarter, usize)> {
        let p = &self.methods.first()?.periods;
        Some((p.first()?.target, p.last()?.target, p.len()))
    }
}

/// Per-origin output of every view.
struct OriginData {
    forecasts: Vec<ViewForecast>,
    period: PoolPeriod,
}

/// Runs the full recursive backtest.
pub fn run_backtest(y: &TimeSeries, plan: &BacktestPlan, cache: Option<DiskCache>) -> Result<EvaluationReport> {
    plan.validate()?;
    let h = plan.horizon as i32;
    let (_, last_target) = plan.evaluation_sample();
    if y.start() > plan.t0 || y.end() < last_target {
        return Err(Error::invalid(format!(
            "data cover {}..{} but the plan needs {}..{}",
            y.start(),
            y.end(),
            plan.t0,
            last_target
        )));
    }
    let ctx = EstimationContext {
        sampler: plan.sampler,
        bridge: plan.bridge,
        horizon: plan.horizon,
        density: plan.density,
        cache,
    };
    let need_evidence = plan.methods.iter().any(|m| m.needs_evidence());
    let origins = plan.origins();
    let views = plan.catalogue.views();

    let jobs: Vec<(usize, Quarter)> = origins
        .iter()
        .flat_map(|&o| (0..views.len()).map(move |v| (v, o)))
        .collect();
    log::info!(
        "estimating {} views on {} windows ({} sampler runs)",
        views.len(),
        origins.len(),
        jobs.len()
    );
    let results: Vec<WindowResult> = jobs
        .par_iter()
        .map(|&(v, o)| estimate_window(y, &views[v], plan.t0, o, &ctx, need_evidence))
        .collect::<Result<_>>()?;

    let mut by_origin: BTreeMap<Quarter, OriginData> = BTreeMap::new();
    for (chunk, &o) in results.chunks(views.len()).zip(&origins) {
        let realized = y
            .get(o + h)
            .ok_or_else(|| Error::invalid(format!("no realization for {}", o + h)))?;
        let forecasts: Vec<ViewForecast> = chunk.iter().map(|r| r.forecast.clone()).collect();
        let evidence = if need_evidence {
            Some(chunk.iter().map(|r| r.log_ml.expect("evidence requested")).collect())
        } else {
            None
        };
        let period = PoolPeriod::from_forecasts(&forecasts, realized, evidence)?;
        by_origin.insert(o, OriginData { forecasts, period });
    }

    let dates = plan.decision_dates();
    let ar_view = plan.ar_view();
    let mut ar: BTreeMap<Method, Vec<ViewForecast>> = BTreeMap::new();
    for (m, scheme) in [
        (Method::ArRecursive, Scheme::Recursive { start: plan.t0 }),
        (Method::ArRolling, Scheme::Rolling { width: plan.rolling_width }),
    ] {
        if !plan.methods.contains(&m) {
            continue;
        }
        // reuse the catalogue's identical view when there is one
        let reuse = matches!(scheme, Scheme::Recursive { .. })
            .then(|| views.iter().position(|v| *v == ar_view))
            .flatten();
        let fc = match reuse {
            Some(i) => dates.iter().map(|o| by_origin[o].forecasts[i].clone()).collect(),
            None => ar_benchmark(y, &ar_view, &dates, scheme, &ctx)?,
        };
        ar.insert(m, fc);
    }

    let equal = plan.equal_prior();
    let per_date: Vec<Vec<PeriodRecord>> = dates
        .par_iter()
        .enumerate()
        .map(|(di, &tw)| {
            let here = &by_origin[&tw];
            let history = || -> Result<PoolHistory> {
                let first = tw - h - plan.window as i32 + 1;
                PoolHistory::new(
                    (0..plan.window as i32)
                        .map(|i| by_origin[&(first + i)].period.clone())
                        .collect(),
                )
            };
            let evidence = here.period.log_evidence.as_deref();
            let ev = || evidence.ok_or_else(|| Error::invalid("evidence missing"));
            plan.methods
                .iter()
                .map(|&m| {
                    let (weights, prior, value) = match m {
                        Method::ArRecursive | Method::ArRolling => {
                            return ar_record(&ar[&m][di], here.period.realized, plan.fan_methods.contains(&m))
                        }
                        Method::EqualWeights => (equal.clone(), None, None),
                        Method::EqualPriors => (posterior_from_log_evidence(&equal, ev()?)?, None, None),
                        Method::MaxMl => {
                            let e = ev()?;
                            let best = (0..e.len())
                                .fold(0, |b, i| if e[i] > e[b] { i } else { b });
                            (PoolWeights::one_hot(e.len(), best), None, None)
                        }
                        Method::W1 | Method::W2 => {
                            let obj = if m == Method::W1 { Objective::F1 } else { Objective::F2 };
                            let o = optimize_weights(&history()?, obj, &plan.optimizer)?;
                            (o.weights, None, Some(o.value))
                        }
                        Method::Pi1 | Method::Pi2 => {
                            let obj = if m == Method::Pi1 { Objective::F1 } else { Objective::F2 };
                            let o = optimize_prior(&history()?, obj, &plan.optimizer)?;
                            let w = posterior_from_log_evidence(&o.weights, ev()?)?;
                            (w, Some(o.weights.into_inner()), Some(o.value))
                        }
                    };
                    pool_record(here, &weights, prior, value, plan.fan_methods.contains(&m))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let methods = plan
        .methods
        .iter()
        .enumerate()
        .map(|(mi, &m)| {
            let periods: Vec<PeriodRecord> = per_date.iter().map(|r| r[mi].clone()).collect();
            let summary = MethodSummary::from_records(&periods)?;
            Ok(MethodResult {
                method: m,
                periods,
                summary,
            })
        })
        .collect::<Result<_>>()?;

    Ok(EvaluationReport {
        t0: plan.t0,
        first_end: plan.first_end,
        last_end: plan.last_end,
        window: plan.window,
        horizon: plan.horizon,
        seed: plan.sampler.seed,
        view_ids: plan.catalogue.ids(),
        scenario_views: plan.catalogue.scenario_mask(),
        fan_levels: FAN_LEVELS.to_vec(),
        methods,
    })
}

fn pool_record(
    here: &OriginData,
    w: &PoolWeights,
    prior: Option<Vec<f64>>,
    objective_value: Option<f64>,
    fan: bool,
) -> Result<PeriodRecord> {
    let p = &here.period;
    let score = floor_log_score(p.pooled_ln_pdf(w.values()));
    let mean = here
        .forecasts
        .iter()
        .zip(w.values())
        .map(|(f, w)| w * f.density.mean())
        .sum();
    let percentiles = if fan {
        let pooled = combine_fixed(&here.forecasts, w)?;
        Some(FAN_LEVELS.iter().map(|&q| pooled.quantile(q)).collect())
    } else {
        None
    };
    Ok(PeriodRecord {
        origin: here.forecasts[0].origin,
        target: p.target,
        realized: p.realized,
        pit: p.pooled_pit(w.values()),
        log_score: score.value,
        floored: score.floored,
        mean,
        weights: Some(w.values().to_vec()),
        prior,
        objective_value,
        percentiles,
    })
}

fn ar_record(f: &ViewForecast, realized: f64, fan: bool) -> Result<PeriodRecord> {
    let score = crate::forecaster::log_score(&f.density, realized);
    Ok(PeriodRecord {
        origin: f.origin,
        target: f.density.target(),
        realized,
        pit: f.density.cdf(realized),
        log_score: score.value,
        floored: score.floored,
        mean: f.density.mean(),
        weights: None,
        prior: None,
        objective_value: None,
        percentiles: fan.then(|| FAN_LEVELS.iter().map(|&q| f.density.quantile(q)).collect()),
    })
}
