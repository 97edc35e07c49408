use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Quarter;
use crate::error::{Error, Result};
use crate::math::{inverse_std_normal_cdf, log_sum_exp, normal_cdf, normal_ln_pdf, normal_pdf};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub mean: f64,
    pub variance: f64,
    pub weight: f64,
}

/// Predictive density represented as a finite mixture of normals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastDensity {
    components: Vec<Component>,
    target: Quarter,
}

impl ForecastDensity {
    /// Builds a density; weights must already sum to one within 1e-10.
    pub fn new(components: Vec<Component>, target: Quarter) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("mixture has no components"));
        }
        for c in &components {
            if !c.mean.is_finite() || !(c.variance > 0.0 && c.variance.is_finite()) {
                return Err(Error::invalid(format!("invalid component {c:?}")));
            }
            if !(c.weight >= 0.0 && c.weight.is_finite()) {
                return Err(Error::invalid(format!("invalid weight {}", c.weight)));
            }
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::invalid(format!("mixture weights sum to {total}")));
        }
        Ok(ForecastDensity { components, target })
    }

    /// Builds a density after rescaling nonnegative weights to sum to one.
    pub fn normalized(mut components: Vec<Component>, target: Quarter) -> Result<Self> {
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::invalid("mixture weights do not have positive mass"));
        }
        for c in &mut components {
            c.weight /= total;
        }
        ForecastDensity::new(components, target)
    }

    pub fn single(mean: f64, variance: f64, target: Quarter) -> Result<Self> {
        ForecastDensity::new(
            vec![Component {
                mean,
                variance,
                weight: 1.0,
            }],
            target,
        )
    }

    /// Gaussian kernel estimate of a sample with Silverman's rule-of-thumb bandwidth.
    /// The estimate is itself an equally weighted normal mixture.
    pub fn kernel_fit(samples: &[f64], target: Quarter) -> Result<Self> {
        let n = samples.len();
        if n < 2 {
            return Err(Error::invalid("kernel fit needs at least two samples"));
        }
        let sd = crate::math::variance(samples).sqrt();
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
        let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
        if !(spread > 0.0) {
            return Err(Error::ZeroVariance);
        }
        let h = 0.9 * spread * (n as f64).powf(-0.2);
        let w = 1.0 / n as f64;
        let components = samples
            .iter()
            .map(|&m| Component {
                mean: m,
                variance: h * h,
                weight: w,
            })
            .collect();
        ForecastDensity::normalized(components, target)
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn target(&self) -> Quarter {
        self.target
    }

    pub fn pdf(&self, y: f64) -> f64 {
        self.components
            .iter()
            .filter(|c| c.weight > 0.0)
            .map(|c| c.weight * normal_pdf(y, c.mean, c.variance))
            .sum()
    }

    /// Log density computed with log-sum-exp, finite far into the tails.
    pub fn ln_pdf(&self, y: f64) -> f64 {
        let terms: Vec<f64> = self
            .components
            .iter()
            .filter(|c| c.weight > 0.0)
            .map(|c| c.weight.ln() + normal_ln_pdf(y, c.mean, c.variance))
            .collect();
        log_sum_exp(&terms)
    }

    pub fn cdf(&self, y: f64) -> f64 {
        let v: f64 = self
            .components
            .iter()
            .filter(|c| c.weight > 0.0)
            .map(|c| c.weight * normal_cdf(y, c.mean, c.variance))
            .sum();
        v.clamp(0.0, 1.0)
    }

    pub fn mean(&self) -> f64 {
        self.components.iter().map(|c| c.weight * c.mean).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.components
            .iter()
            .map(|c| c.weight * (c.variance + (c.mean - m) * (c.mean - m)))
            .sum()
    }

    /// Interval guaranteed to hold all but a negligible amount of mass.
    pub fn support_bounds(&self, width_sd: f64) -> (f64, f64) {
        let active = self.components.iter().filter(|c| c.weight > 0.0);
        let max_sd = active
            .clone()
            .map(|c| c.variance.sqrt())
            .fold(0.0, f64::max);
        let lo = active.clone().map(|c| c.mean).fold(f64::INFINITY, f64::min);
        let hi = active.map(|c| c.mean).fold(f64::NEG_INFINITY, f64::max);
        (lo - width_sd * max_sd, hi + width_sd * max_sd)
    }

    /// Quantile by safeguarded Newton iteration on the CDF, started from the normal
    /// approximation and falling back to bisection whenever a step leaves the bracket.
    pub fn quantile(&self, prob: f64) -> f64 {
        assert!(prob > 0.0 && prob < 1.0, "quantile level must be in (0,1)");
        let (mut lo, mut hi) = self.support_bounds(40.0);
        let sd = self.variance().sqrt();
        let mut x = self.mean() + sd * inverse_std_normal_cdf(prob);
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        for _ in 0..200 {
            let f = self.cdf(x) - prob;
            if f == 0.0 {
                return x;
            }
            if f < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            if hi - lo <= 1e-12 * (1.0 + x.abs()) {
                break;
            }
            let d = self.pdf(x);
            let step = x - f / d;
            let next = if d > 0.0 && step > lo && step < hi {
                step
            } else {
                0.5 * (lo + hi)
            };
            if (next - x).abs() <= 1e-13 * (1.0 + x.abs()) {
                return next;
            }
            x = next;
        }
        0.5 * (lo + hi)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = self.components.last().unwrap();
        for c in &self.components {
            acc += c.weight;
            if u < acc {
                chosen = c;
                break;
            }
        }
        let z: f64 = StandardNormal.sample(rng);
        chosen.mean + chosen.variance.sqrt() * z
    }

    /// Merge components whose (mean, variance) are bitwise equal, summing their weights.
    pub fn merge_identical(self) -> ForecastDensity {
        let mut comps = self.components;
        comps.sort_by(|a, b| {
            a.mean
                .total_cmp(&b.mean)
                .then(a.variance.total_cmp(&b.variance))
        });
        let mut out: Vec<Component> = Vec::with_capacity(comps.len());
        for c in comps {
            match out.last_mut() {
                Some(last)
                    if last.mean.to_bits() == c.mean.to_bits()
                        && last.variance.to_bits() == c.variance.to_bits() =>
                {
                    last.weight += c.weight
                }
                _ => out.push(c),
            }
        }
        ForecastDensity {
            components: out,
            target: self.target,
        }
    }
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Linear pool of densities: concatenates components with weights scaled by the outer weight.
pub fn flatten_mixture_of_mixtures(parts: &[(&ForecastDensity, f64)]) -> Result<ForecastDensity> {
    let Some((first, _)) = parts.first() else {
        return Err(Error::invalid("no densities to pool"));
    };
    let target = first.target;
    let total: f64 = parts.iter().map(|(_, w)| w).sum();
    if parts.iter().any(|(_, w)| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-10 {
        return Err(Error::invalid(format!(
            "outer weights must be a point on the simplex (sum {total})"
        )));
    }
    let mut components = Vec::with_capacity(parts.iter().map(|(d, _)| d.components.len()).sum());
    for (d, w) in parts {
        if d.target != target {
            return Err(Error::invalid(format!(
                "target period mismatch: {} vs {}",
                d.target, target
            )));
        }
        if *w == 0.0 {
            continue;
        }
        components.extend(d.components.iter().map(|c| Component {
            weight: c.weight * w,
            ..*c
        }));
    }
    ForecastDensity::new(components, target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q() -> Quarter {
        Quarter::new(2000, 1)
    }

    fn comp(mean: f64, variance: f64, weight: f64) -> Component {
        Component {
            mean,
            variance,
            weight,
        }
    }

    #[test]
    fn pdf_examples() {
        let d = ForecastDensity::single(0.0, 1.0, q()).unwrap();
        assert!((d.pdf(0.0) - 0.398_942_3).abs() < 1e-7);
        let d = ForecastDensity::new(vec![comp(-1.0, 1.0, 0.5), comp(1.0, 1.0, 0.5)], q()).unwrap();
        // both components contribute phi(1)
        let phi1 = (-0.5f64).exp() / (2.0 * std::f64::consts::PI).sqrt();
        assert!((d.pdf(0.0) - phi1).abs() < 1e-15);
        assert!((d.pdf(0.0) - 0.241_970_7).abs() < 1e-7);
        let d = ForecastDensity::new(vec![comp(0.0, 1.0, 1.0), comp(100.0, 1.0, 0.0)], q()).unwrap();
        assert!((d.pdf(0.0) - 0.398_942_3).abs() < 1e-7);
    }

    #[test]
    fn cdf_examples() {
        let d = ForecastDensity::single(0.0, 1.0, q()).unwrap();
        assert_eq!(d.cdf(0.0), 0.5);
        let d = ForecastDensity::new(vec![comp(-1.0, 1.0, 0.5), comp(1.0, 1.0, 0.5)], q()).unwrap();
        assert!((d.cdf(0.0) - 0.5).abs() < 1e-15);
        let d = ForecastDensity::single(2.0, 4.0, q()).unwrap();
        assert!((d.cdf(2.0 + 2.0 * 1.959_964) - 0.975).abs() < 1e-6);
    }

    #[test]
    fn quantile_inverts_cdf() {
        let d = ForecastDensity::single(2.0, 4.0, q()).unwrap();
        assert!((d.quantile(0.975) - (2.0 + 2.0 * 1.959_963_984_540_054)).abs() < 1e-9);
        let d = ForecastDensity::new(
            vec![comp(-3.0, 0.2, 0.3), comp(0.5, 1.0, 0.6), comp(8.0, 0.01, 0.1)],
            q(),
        )
        .unwrap();
        for p in [0.01, 0.05, 0.3, 0.5, 0.85, 0.9, 0.95, 0.99] {
            assert!((d.cdf(d.quantile(p)) - p).abs() < 1e-10, "{p}");
        }
    }

    #[test]
    fn weights_must_sum_to_one() {
        assert!(ForecastDensity::new(vec![comp(0.0, 1.0, 0.4)], q()).is_err());
        assert!(ForecastDensity::new(vec![comp(0.0, 0.0, 1.0)], q()).is_err());
        assert!(ForecastDensity::new(vec![], q()).is_err());
    }

    #[test]
    fn flatten_examples() {
        let a = ForecastDensity::single(0.0, 1.0, q()).unwrap();
        let b = ForecastDensity::single(3.0, 2.0, q()).unwrap();
        let same = flatten_mixture_of_mixtures(&[(&a, 1.0)]).unwrap();
        assert_eq!(same, a);
        let f = flatten_mixture_of_mixtures(&[(&a, 0.3), (&b, 0.7)]).unwrap();
        assert_eq!(f.components().len(), 2);
        assert!((f.components()[0].weight - 0.3).abs() < 1e-15);
        assert!((f.components()[1].weight - 0.7).abs() < 1e-15);
        for i in 0..100 {
            let y = -5.0 + 0.1 * i as f64;
            let direct = 0.3 * a.pdf(y) + 0.7 * b.pdf(y);
            assert!((f.pdf(y) - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn flatten_rejects_mismatched_targets() {
        let a = ForecastDensity::single(0.0, 1.0, q()).unwrap();
        let b = ForecastDensity::single(0.0, 1.0, q() + 1).unwrap();
        assert!(flatten_mixture_of_mixtures(&[(&a, 0.5), (&b, 0.5)]).is_err());
    }

    #[test]
    fn kernel_fit_is_a_mixture() {
        let samples: Vec<f64> = (0..200).map(|i| (i as f64 * 0.37).sin()).collect();
        let d = ForecastDensity::kernel_fit(&samples, q()).unwrap();
        assert_eq!(d.components().len(), 200);
        let h2 = d.components()[0].variance;
        assert!(h2 > 0.0 && h2 < 0.1);
    }

    #[test]
    fn merge_identical_sums_weights() {
        let d = ForecastDensity::new(
            vec![comp(1.0, 1.0, 0.25), comp(2.0, 1.0, 0.5), comp(1.0, 1.0, 0.25)],
            q(),
        )
        .unwrap();
        let m = d.clone().merge_identical();
        assert_eq!(m.components().len(), 2);
        for y in [-1.0, 0.5, 1.7, 3.0] {
            assert!((m.pdf(y) - d.pdf(y)).abs() < 1e-15);
        }
    }

    fn arb_density() -> impl Strategy<Value = ForecastDensity> {
        prop::collection::vec((-5.0..5.0f64, 0.05..4.0f64, 0.01..1.0f64), 1..6).prop_map(|cs| {
            let comps = cs.into_iter().map(|(m, v, w)| comp(m, v, w)).collect();
            ForecastDensity::normalized(comps, Quarter::new(2000, 1)).unwrap()
        })
    }

    proptest! {
        #[test]
        fn pdf_integrates_to_one(d in arb_density()) {
            let (lo, hi) = d.support_bounds(10.0);
            // composite Simpson on a fine grid
            let n = 20_000;
            let h = (hi - lo) / n as f64;
            let mut s = d.pdf(lo) + d.pdf(hi);
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                s += w * d.pdf(lo + i as f64 * h);
            }
            prop_assert!((s * h / 3.0 - 1.0).abs() < 1e-6);
        }

        #[test]
        fn cdf_monotone_and_consistent_with_pdf(d in arb_density()) {
            let (lo, hi) = d.support_bounds(4.0);
            let mut prev = 0.0;
            for i in 0..=400 {
                let y = lo + (hi - lo) * i as f64 / 400.0;
                let c = d.cdf(y);
                prop_assert!(c >= prev);
                prev = c;
                let step = 1e-4;
                let deriv = (d.cdf(y + step) - d.cdf(y - step)) / (2.0 * step);
                prop_assert!((deriv - d.pdf(y)).abs() < 1e-4);
            }
            prop_assert!(d.cdf(-1e6) == 0.0);
            prop_assert!((d.cdf(1e6) - 1.0).abs() < 1e-14);
        }

        #[test]
        fn flatten_is_associative_in_pdf(
            a in arb_density(), b in arb_density(), c in arb_density(),
            w in (0.05..0.9f64, 0.05..0.9f64),
        ) {
            // ((a,b),c) vs (a,(b,c)) with the same overall weights
            let (wa, rest) = (w.0 * 0.5, 1.0 - w.0 * 0.5);
            let wb = rest * w.1;
            let wc = rest - wb;
            let ab = flatten_mixture_of_mixtures(&[(&a, wa / (wa + wb)), (&b, wb / (wa + wb))]).unwrap();
            let left = flatten_mixture_of_mixtures(&[(&ab, wa + wb), (&c, wc)]).unwrap();
            let bc = flatten_mixture_of_mixtures(&[(&b, wb / (wb + wc)), (&c, wc / (wb + wc))]).unwrap();
            let right = flatten_mixture_of_mixtures(&[(&a, wa), (&bc, wb + wc)]).unwrap();
            for y in [-3.0, -0.5, 0.0, 1.3, 4.0] {
                prop_assert!((left.pdf(y) - right.pdf(y)).abs() < 1e-12);
            }
        }
    }
}
