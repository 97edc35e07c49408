use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::objective::{objective, Mode, Objective, PoolHistory};
use crate::domain::PoolWeights;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Minimum number of multi-starts; all vertices and the barycenter are always included.
    pub starts: usize,
    pub seed: u64,
    pub em_tolerance: f64,
    pub em_max_iterations: usize,
    pub nm_max_evaluations: usize,
    pub nm_tolerance: f64,
    /// Weights below this are set to zero after optimisation.
    pub truncation: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            starts: 20,
            seed: 0x0b5e_55ed,
            em_tolerance: 1e-9,
            em_max_iterations: 5000,
            nm_max_evaluations: 3000,
            nm_tolerance: 1e-10,
            truncation: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub weights: PoolWeights,
    pub value: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

/// Logit of the vertex starts: puts ~97% of the mass on one of 13 views.
const VERTEX_LOGIT: f64 = 6.0;

/// Minimises `f` with the Nelder–Mead simplex method. Non-finite values count as `+inf`.
pub fn nelder_mead<F: Fn(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    step: f64,
    max_evaluations: usize,
    tolerance: f64,
) -> NelderMeadResult {
    let n = x0.len();
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            f64::INFINITY
        }
    };
    if n == 0 {
        return NelderMeadResult {
            x: vec![],
            value: eval(x0),
            evaluations: 1,
        };
    }
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    pts.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| eval(p)).collect();
    let mut evals = n + 1;

    while evals < max_evaluations {
        // stable sort keeps the earlier point first among ties
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let spread = vals[n] - vals[0];
        let diameter = pts[1..]
            .iter()
            .map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if (spread.is_finite() && spread <= tolerance * (1.0 + vals[0].abs()) && diameter < 1e-8)
            || diameter < 1e-12
        {
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| pts[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&pts[n])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(1.0);
        let fr = eval(&xr);
        evals += 1;
        if fr < vals[0] {
            let xe = along(2.0);
            let fe = eval(&xe);
            evals += 1;
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
        } else {
            // outside contraction if the reflection helped at all, inside otherwise
            let xc = along(if fr < vals[n] { 0.5 } else { -0.5 });
            let fc = eval(&xc);
            evals += 1;
            if fc < vals[n].min(fr) {
                pts[n] = xc;
                vals[n] = fc;
            } else {
                for i in 1..=n {
                    let p: Vec<f64> = pts[i]
                        .iter()
                        .zip(&pts[0])
                        .map(|(x, b)| b + 0.5 * (x - b))
                        .collect();
                    vals[i] = eval(&p);
                    pts[i] = p;
                }
                evals += n;
            }
        }
    }
    let best = (0..=n)
        .min_by(|&a, &b| vals[a].total_cmp(&vals[b]))
        .expect("nonempty simplex");
    NelderMeadResult {
        x: pts[best].clone(),
        value: vals[best],
        evaluations: evals,
    }
}

/// Softmax with the last logit pinned at zero.
fn softmax(z: &[f64]) -> PoolWeights {
    let m = z.iter().copied().fold(0.0, f64::max);
    let mut w: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    w.push((-m).exp());
    PoolWeights::normalized(w).expect("softmax is on the simplex")
}

/// Logits of an interior point (inverse of [`softmax`]).
fn logits(w: &[f64]) -> Vec<f64> {
    let last = w[w.len() - 1].ln();
    w[..w.len() - 1].iter().map(|v| v.ln() - last).collect()
}

fn vertex_logits(n: usize, i: usize) -> Vec<f64> {
    if i + 1 == n {
        vec![-VERTEX_LOGIT; n - 1]
    } else {
        let mut z = vec![0.0; n - 1];
        z[i] = VERTEX_LOGIT;
        z
    }
}

enum Start {
    Interior(PoolWeights),
    Vertex(usize),
}

/// Barycenter first, then every vertex, then fixed-seed uniform draws on the simplex.
fn start_set(n: usize, cfg: &OptimizerConfig) -> Vec<Start> {
    let mut starts = vec![Start::Interior(PoolWeights::uniform(n))];
    starts.extend((0..n).map(Start::Vertex));
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    while starts.len() < cfg.starts {
        let e: Vec<f64> = (0..n).map(|_| Exp1.sample(&mut rng)).collect();
        starts.push(Start::Interior(PoolWeights::normalized(e).expect("positive draws")));
    }
    starts
}

/// The documented starting points of the multi-start search, as weights: the barycenter,
/// every vertex, then the seeded uniform draws on the simplex.
pub fn start_points(n: usize, cfg: &OptimizerConfig) -> Vec<PoolWeights> {
    start_set(n, cfg)
        .into_iter()
        .map(|s| match s {
            Start::Interior(w) => w,
            Start::Vertex(i) => PoolWeights::one_hot(n, i),
        })
        .collect()
}

/// Accepts a candidate only if it beats the incumbent by more than rounding noise, so that
/// ties resolve to the earliest start (the barycenter).
fn improves(candidate: f64, best: f64) -> bool {
    candidate.is_finite() && (!best.is_finite() || candidate > best + 1e-12 * (1.0 + best.abs()))
}

fn multistart(history: &PoolHistory, obj: Objective, mode: Mode, cfg: &OptimizerConfig) -> Result<Optimum> {
    let n = history.views();
    let f = |w: &PoolWeights| objective(w, history, obj, mode).unwrap_or(f64::NEG_INFINITY);
    if n == 1 {
        let w = PoolWeights::uniform(1);
        let value = f(&w);
        return finish(history, obj, mode, cfg, w, value, 0);
    }
    let starts = start_set(n, cfg);
    let results: Vec<Vec<(PoolWeights, f64, usize)>> = starts
        .par_iter()
        .map(|s| {
            let (exact, z0) = match s {
                Start::Interior(w) => (w.clone(), logits(w.values())),
                Start::Vertex(i) => (PoolWeights::one_hot(n, *i), vertex_logits(n, *i)),
            };
            let exact_value = f(&exact);
            let nm = nelder_mead(
                |z| -f(&softmax(z)),
                &z0,
                1.0,
                cfg.nm_max_evaluations,
                cfg.nm_tolerance,
            );
            vec![
                (exact, exact_value, 1),
                (softmax(&nm.x), -nm.value, nm.evaluations),
            ]
        })
        .collect();
    let mut best: Option<(PoolWeights, f64)> = None;
    let mut evaluations = 0;
    for (w, v, e) in results.into_iter().flatten() {
        evaluations += e;
        if improves(v, best.as_ref().map_or(f64::NEG_INFINITY, |b| b.1)) {
            best = Some((w, v));
        }
    }
    let (w, v) = best.ok_or(Error::NonFiniteObjective)?;
    finish(history, obj, mode, cfg, w, v, evaluations)
}

fn finish(
    history: &PoolHistory,
    obj: Objective,
    mode: Mode,
    cfg: &OptimizerConfig,
    w: PoolWeights,
    value: f64,
    iterations: usize,
) -> Result<Optimum> {
    if !value.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    let weights = w.truncated(cfg.truncation);
    let value = objective(&weights, history, obj, mode)?;
    Ok(Optimum {
        weights,
        value,
        iterations,
    })
}

/// One multiplicative EM update of linear-pool weights for the log-score objective:
/// `w_i ← w_i · mean_t [p_it / Σ_j w_j p_jt]`.
pub(crate) fn em_step(history: &PoolHistory, w: &[f64]) -> Vec<f64> {
    let r = history.len() as f64;
    let mut next = vec![0.0; w.len()];
    for (t, p) in history.periods().iter().enumerate() {
        let pooled = history.pooled_ln_pdf(t, w);
        for (i, l) in p.ln_pdf.iter().enumerate() {
            if w[i] > 0.0 {
                next[i] += w[i] * (l - pooled).exp() / r;
            }
        }
    }
    let s: f64 = next.iter().sum();
    next.iter().map(|v| v / s).collect()
}

fn em(history: &PoolHistory, cfg: &OptimizerConfig) -> Result<Optimum> {
    let n = history.views();
    let mut w = vec![1.0 / n as f64; n];
    if !objective(&PoolWeights::uniform(n), history, Objective::F1, Mode::Weights)?.is_finite() {
        return Err(Error::NonFiniteObjective);
    }
    let mut iterations = 0;
    while iterations < cfg.em_max_iterations {
        let next = em_step(history, &w);
        iterations += 1;
        let change = next
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        w = next;
        if change <= cfg.em_tolerance {
            break;
        }
    }
    let mut best = PoolWeights::normalized(w)?;
    let mut value = objective(&best, history, Objective::F1, Mode::Weights)?;
    // safeguard when the iteration stops early: never return less than a vertex
    for i in 0..n {
        let v = PoolWeights::one_hot(n, i);
        let f = objective(&v, history, Objective::F1, Mode::Weights)?;
        if improves(f, value) {
            best = v;
            value = f;
        }
    }
    finish(history, Objective::F1, Mode::Weights, cfg, best, value, iterations)
}

/// Combination weights maximising the chosen objective over the history window.
pub fn optimize_weights(history: &PoolHistory, obj: Objective, cfg: &OptimizerConfig) -> Result<Optimum> {
    match obj {
        Objective::F1 => em(history, cfg),
        Objective::F2 => multistart(history, obj, Mode::Weights, cfg),
    }
}

/// Prior view probabilities maximising the chosen objective when every period pools with
/// the posterior probabilities implied by that prior.
pub fn optimize_prior(history: &PoolHistory, obj: Objective, cfg: &OptimizerConfig) -> Result<Optimum> {
    if !history.has_evidence() {
        return Err(Error::invalid("prior optimisation needs evidence for every period"));
    }
    multistart(history, obj, Mode::Prior, cfg)
}
