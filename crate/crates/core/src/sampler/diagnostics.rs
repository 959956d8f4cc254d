//! Convergence diagnostics on per-chain draw sequences.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{self, log, sqrt};

/// A diagnostic value. `degenerate` is set when the input has no variance,
/// in which case `value` is NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub value: f64,
    pub degenerate: bool,
}

impl Diagnostic {
    fn degenerate() -> Self {
        Self {
            value: f64::NAN,
            degenerate: true,
        }
    }
}

fn check_lengths(chains: &[&[f64]], min_chains: usize) -> Result<usize> {
    if chains.len() < min_chains {
        return Err(Error::Diagnostic(format!(
            "need at least {min_chains} chains, got {}",
            chains.len()
        )));
    }
    let n = chains[0].len();
    if chains.iter().any(|c| c.len() != n) {
        return Err(Error::Diagnostic("chains have different lengths".into()));
    }
    if n < 4 {
        return Err(Error::Diagnostic(format!(
            "need at least 4 draws per chain, got {n}"
        )));
    }
    if chains.iter().any(|c| c.iter().any(|x| !x.is_finite())) {
        return Err(Error::NonFinite);
    }
    Ok(n)
}

/// Split-chain potential scale reduction factor. Each chain is cut into two
/// halves (dropping the middle draw of odd-length chains) and the classic
/// between/within variance ratio is computed over the halves.
pub fn rhat(chains: &[&[f64]]) -> Result<Diagnostic> {
    let n = check_lengths(chains, 2)?;
    let half = n / 2;
    let mut splits: Vec<&[f64]> = Vec::with_capacity(2 * chains.len());
    for c in chains {
        splits.push(&c[..half]);
        splits.push(&c[n - half..]);
    }
    let m = splits.len() as f64;
    let nh = half as f64;
    let means: Vec<f64> = splits.iter().map(|s| math::mean(s)).collect();
    let w = splits.iter().map(|s| math::sample_variance(s)).sum::<f64>() / m;
    let b = nh * math::sample_variance(&means);
    if w <= 0.0 {
        return Ok(Diagnostic::degenerate());
    }
    let var_plus = (nh - 1.0) / nh * w + b / nh;
    Ok(Diagnostic {
        value: sqrt(var_plus / w),
        degenerate: false,
    })
}

/// Effective sample size from the multi-chain autocorrelation estimate,
/// truncated with Geyer's initial positive sequence and made monotone.
/// Works with a single chain and is capped at the total number of draws.
pub fn ess(chains: &[&[f64]]) -> Result<Diagnostic> {
    let n = check_lengths(chains, 1)?;
    let m = chains.len();
    let nf = n as f64;
    let means: Vec<f64> = chains.iter().map(|c| math::mean(c)).collect();
    let acov = |chain: usize, lag: usize| -> f64 {
        let c = chains[chain];
        let mu = means[chain];
        let mut s = 0.0;
        for i in 0..n - lag {
            s += (c[i] - mu) * (c[i + lag] - mu);
        }
        s / nf
    };
    let mean_acov = |lag: usize| (0..m).map(|c| acov(c, lag)).sum::<f64>() / m as f64;

    let chain_var_mean = mean_acov(0) * nf / (nf - 1.0);
    let mut var_plus = chain_var_mean * (nf - 1.0) / nf;
    if m > 1 {
        var_plus += math::sample_variance(&means);
    }
    if !(var_plus > 0.0) || chain_var_mean <= 0.0 {
        return Ok(Diagnostic::degenerate());
    }
    let rho = |lag: usize| 1.0 - (chain_var_mean - mean_acov(lag)) / var_plus;

    let mut rho_s = vec![0.0; n + 2];
    rho_s[0] = 1.0;
    let mut rho_even = 1.0;
    let mut rho_odd = rho(1);
    rho_s[1] = rho_odd;
    let mut t = 1;
    while t + 4 < n && rho_even + rho_odd > 0.0 {
        rho_even = rho(t + 1);
        rho_odd = rho(t + 2);
        if rho_even + rho_odd >= 0.0 {
            rho_s[t + 1] = rho_even;
            rho_s[t + 2] = rho_odd;
        }
        t += 2;
    }
    let max_t = t;
    if rho_even > 0.0 {
        rho_s[max_t + 1] = rho_even;
    }
    let mut t = 1;
    while t + 3 <= max_t {
        if rho_s[t + 1] + rho_s[t + 2] > rho_s[t - 1] + rho_s[t] {
            rho_s[t + 1] = 0.5 * (rho_s[t - 1] + rho_s[t]);
            rho_s[t + 2] = rho_s[t + 1];
        }
        t += 2;
    }
    let total = (m * n) as f64;
    let tau = -1.0 + 2.0 * rho_s[..max_t].iter().sum::<f64>() + rho_s[max_t + 1];
    let tau = tau.max(1.0 / (log(total) / core::f64::consts::LN_10));
    Ok(Diagnostic {
        value: (total / tau).min(total),
        degenerate: false,
    })
}
