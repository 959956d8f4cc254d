//! Gaussian kernel density estimation with Silverman's bandwidth.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math::{self, exp, pow, quantile_sorted, sqrt, FRAC_1_SQRT_2PI};

/// Kernel contributions beyond this many bandwidths are dropped (< 1e-13).
const CUTOFF: f64 = 8.0;

/// Points on the grid used to locate the density mode.
pub const MODE_GRID_POINTS: usize = 512;

#[derive(Debug, Clone)]
pub struct Kde {
    sorted: Vec<f64>,
    bandwidth: f64,
}

/// `0.9 * min(sd, IQR / 1.34) * n^(-1/5)` on sorted data. Falls back to the
/// SD alone when the IQR is zero.
pub fn silverman_bandwidth(sorted: &[f64]) -> f64 {
    let sd = sqrt(math::sample_variance(sorted));
    let iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * pow(sorted.len() as f64, -0.2)
}

impl Kde {
    pub fn new(samples: &[f64]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::TooFewSamples {
                required: 2,
                found: samples.len(),
            });
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        let sorted = math::sorted(samples);
        let bandwidth = silverman_bandwidth(&sorted);
        if !(bandwidth > 0.0) {
            return Err(Error::Parameter(
                "samples have no spread; density estimate undefined".into(),
            ));
        }
        Ok(Self { sorted, bandwidth })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn density(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let lo = self.sorted.partition_point(|&v| v < x - CUTOFF * h);
        let hi = self.sorted.partition_point(|&v| v <= x + CUTOFF * h);
        let sum: f64 = self.sorted[lo..hi]
            .iter()
            .map(|&v| {
                let z = (x - v) / h;
                exp(-0.5 * z * z)
            })
            .sum();
        sum * FRAC_1_SQRT_2PI / (h * self.sorted.len() as f64)
    }

    /// `(x, density)` pairs on `n` evenly spaced points from `lo` to `hi`.
    pub fn grid(&self, lo: f64, hi: f64, n: usize) -> Vec<(f64, f64)> {
        if n == 1 {
            return alloc::vec![(lo, self.density(lo))];
        }
        let step = (hi - lo) / (n - 1) as f64;
        (0..n)
            .map(|i| {
                let x = if i + 1 == n { hi } else { lo + step * i as f64 };
                (x, self.density(x))
            })
            .collect()
    }

    /// Grid point of highest density over the sample range; the first
    /// maximum wins on ties.
    pub fn mode(&self) -> f64 {
        let lo = self.sorted[0];
        let hi = self.sorted[self.sorted.len() - 1];
        let mut best = (lo, f64::NEG_INFINITY);
        for (x, d) in self.grid(lo, hi, MODE_GRID_POINTS) {
            if d > best.1 {
                best = (x, d);
            }
        }
        best.0
    }
}

/// Estimated posterior density at `x`. Needs at least 100 samples.
pub fn density_at_point(samples: &[f64], x: f64) -> Result<f64> {
    if samples.len() < 100 {
        return Err(Error::TooFewSamples {
            required: 100,
            found: samples.len(),
        });
    }
    if !x.is_finite() {
        return Err(Error::Parameter(format!(
            "evaluation point must be finite, got {x}"
        )));
    }
    Ok(Kde::new(samples)?.density(x))
}
