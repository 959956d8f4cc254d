//! Scalar helpers shared by the rest of the crate.
//!
//! `core` has no transcendental functions, so everything goes through `libm`.

use alloc::vec::Vec;

pub use libm::{atanh, ceil, exp, expm1, fabs, floor, lgamma, log, log1p, pow, sqrt, tanh};

/// `ln(sqrt(2π))`
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `1 / sqrt(2π)`
pub const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub const LN_2: f64 = core::f64::consts::LN_2;

pub fn normal_lpdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - log(sd) - LN_SQRT_2PI
}

pub fn normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    FRAC_1_SQRT_2PI / sd * exp(-0.5 * z * z)
}

/// Log density of a half-normal with the given scale, for `x >= 0`.
pub fn half_normal_lpdf(x: f64, scale: f64) -> f64 {
    LN_2 + normal_lpdf(x, 0.0, scale)
}

/// `log(exp(a) + exp(b))`
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + log1p(exp(lo - hi))
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || !max.is_finite() {
        return max;
    }
    let sum: f64 = xs.iter().map(|&x| exp(x - max)).sum();
    max + log(sum)
}

pub fn log_mean_exp(xs: &[f64]) -> f64 {
    log_sum_exp(xs) - log(xs.len() as f64)
}

/// `log(1 - tanh(a)^2)`, stable for large `|a|`.
pub fn log1m_tanh_sq(a: f64) -> f64 {
    let a = fabs(a);
    // 1 - tanh² = sech² = 4 e^{-2a} / (1 + e^{-2a})²
    2.0 * LN_2 - 2.0 * a - 2.0 * log1p(exp(-2.0 * a))
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    lgamma(a) + lgamma(b) - lgamma(a + b)
}

/// Binomial coefficient, exact for arguments whose result fits in 53 bits.
pub fn choose(n: u64, k: u64) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c = 1.0;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sum of squared deviations from the mean. Values are shifted by the first
/// element first, so constant input gives exactly zero.
fn sum_sq_dev(xs: &[f64]) -> f64 {
    let x0 = xs[0];
    let m = xs.iter().map(|&x| x - x0).sum::<f64>() / xs.len() as f64;
    xs.iter().map(|&x| (x - x0 - m) * (x - x0 - m)).sum()
}

/// Sample variance with the `n - 1` denominator. Zero for fewer than two values.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    sum_sq_dev(xs) / (n - 1) as f64
}

/// Variance with the `n` denominator.
pub fn population_variance(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    sum_sq_dev(xs) / xs.len() as f64
}

pub fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Quantile of already sorted data, linearly interpolating between order
/// statistics at position `(n - 1) * prob` (0-based).
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let n = sorted.len();
    debug_assert!(n > 0);
    let h = (n - 1) as f64 * prob;
    let lo = floor(h) as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

pub fn median_sorted(sorted: &[f64]) -> f64 {
    quantile_sorted(sorted, 0.5)
}

/// Median absolute deviation scaled by 1.4826 so it estimates the standard
/// deviation of normal data.
pub fn mad_sd(xs: &[f64]) -> f64 {
    let s = sorted(xs);
    let med = median_sorted(&s);
    let dev: Vec<f64> = s.iter().map(|&x| fabs(x - med)).collect();
    1.4826 * median_sorted(&sorted(&dev))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
