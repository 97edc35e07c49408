//! Small numerical helpers shared across modules.

use statrs::function::erf::erfc;
use statrs::function::gamma::ln_gamma;

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

#[inline]
pub fn normal_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    normal_ln_pdf(x, mean, variance).exp()
}

#[inline]
pub fn normal_ln_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    let z = x - mean;
    -LN_SQRT_2PI - 0.5 * variance.ln() - 0.5 * z * z / variance
}

/// Standard normal CDF, accurate in both tails.
#[inline]
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal quantile.
pub fn inverse_std_normal_cdf(p: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    Normal::standard().inverse_cdf(p)
}

#[inline]
pub fn normal_cdf(x: f64, mean: f64, variance: f64) -> f64 {
    std_normal_cdf((x - mean) / variance.sqrt())
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Log density of an inverse-gamma(shape, scale) variate.
pub fn inv_gamma_ln_pdf(x: f64, shape: f64, scale: f64) -> f64 {
    shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - scale / x
}

/// Log density of a Dirichlet(alpha) at `x`, with respect to Lebesgue measure on the
/// first `len - 1` coordinates.
pub fn dirichlet_ln_pdf(x: &[f64], alpha: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), alpha.len());
    let sum_alpha: f64 = alpha.iter().sum();
    let mut out = ln_gamma(sum_alpha);
    for (&xi, &ai) in x.iter().zip(alpha) {
        out += (ai - 1.0) * xi.ln() - ln_gamma(ai);
    }
    out
}

/// Log normalising constant of a Dirichlet, `ln Γ(Σα) - Σ ln Γ(α_i)`.
pub fn dirichlet_ln_norm(alpha: &[f64]) -> f64 {
    ln_gamma(alpha.iter().sum()) - alpha.iter().map(|&a| ln_gamma(a)).sum::<f64>()
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Stationary distribution of a row-stochastic matrix stored row-major. `None` when the
/// chain has no unique strictly-positive stationary vector.
pub fn stationary_distribution(k: usize, rows: &[f64]) -> Option<Vec<f64>> {
    if k == 1 {
        return Some(vec![1.0]);
    }
    // Solve (P' - I) pi = 0 with the last equation replaced by sum(pi) = 1.
    let mut a = nalgebra::DMatrix::<f64>::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            a[(j, i)] = rows[i * k + j];
        }
        a[(i, i)] -= 1.0;
    }
    for j in 0..k {
        a[(k - 1, j)] = 1.0;
    }
    let mut b = nalgebra::DVector::<f64>::zeros(k);
    b[k - 1] = 1.0;
    let pi = a.lu().solve(&b)?;
    if pi.iter().all(|&v| v.is_finite() && v > 0.0) {
        let s: f64 = pi.iter().sum();
        Some(pi.iter().map(|v| v / s).collect())
    } else {
        None
    }
}
