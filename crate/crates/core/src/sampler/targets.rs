//! Small targets with known posteriors, used to check the sampler.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::Target;
use crate::error::{Error, Result};
use crate::math::{exp, log1p, sqrt};

/// Independent standard normals in `dim` dimensions.
#[derive(Debug, Clone, Copy)]
pub struct IsoGaussian {
    dim: usize,
}

impl IsoGaussian {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl Target for IsoGaussian {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        let mut lp = 0.0;
        for (g, &v) in grad.iter_mut().zip(x) {
            *g = -v;
            lp -= 0.5 * v * v;
        }
        Ok(lp)
    }
}

/// Binomial likelihood with a Beta prior, sampled on the logit scale.
/// The constrained output is the success probability `p`.
#[derive(Debug, Clone, Copy)]
pub struct BetaBinomial {
    k: f64,
    n: f64,
    a: f64,
    b: f64,
}

impl BetaBinomial {
    pub fn new(k: u64, n: u64, a: f64, b: f64) -> Result<Self> {
        if k > n {
            return Err(Error::Parameter(format!("k = {k} exceeds n = {n}")));
        }
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(Error::Parameter(format!(
                "Beta({a}, {b}) needs positive finite shapes"
            )));
        }
        Ok(Self {
            k: k as f64,
            n: n as f64,
            a,
            b,
        })
    }

    /// Parameters of the conjugate Beta posterior.
    pub fn posterior(&self) -> (f64, f64) {
        (self.a + self.k, self.b + self.n - self.k)
    }

    pub fn posterior_mean(&self) -> f64 {
        let (a, b) = self.posterior();
        a / (a + b)
    }

    pub fn posterior_variance(&self) -> f64 {
        let (a, b) = self.posterior();
        a * b / ((a + b) * (a + b) * (a + b + 1.0))
    }
}

impl Target for BetaBinomial {
    fn dim(&self) -> usize {
        1
    }

    fn log_density_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        let (a, b) = self.posterior();
        let t = x[0];
        // log p and log(1 - p) for p = logistic(t); the logit Jacobian adds one to each exponent.
        let log_p = -log1p(exp(-t));
        let log_q = -log1p(exp(t));
        let p = exp(log_p);
        grad[0] = a * (1.0 - p) - b * p;
        let lp = a * log_p + b * log_q;
        if lp.is_finite() {
            Ok(lp)
        } else {
            Err(Error::NonFinite)
        }
    }

    fn param_names(&self) -> Vec<String> {
        vec!["p".into()]
    }

    fn constrained(&self, x: &[f64], out: &mut Vec<f64>) {
        out.push(1.0 / (1.0 + exp(-x[0])));
    }
}

/// Normal observations with known standard deviation and a normal prior on
/// the mean.
#[derive(Debug, Clone)]
pub struct NormalMean {
    y: Vec<f64>,
    sigma: f64,
    prior_mean: f64,
    prior_sd: f64,
}

impl NormalMean {
    pub fn new(y: Vec<f64>, sigma: f64, prior_mean: f64, prior_sd: f64) -> Result<Self> {
        if !(sigma > 0.0 && prior_sd > 0.0) {
            return Err(Error::Parameter(
                "standard deviations must be positive".into(),
            ));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            y,
            sigma,
            prior_mean,
            prior_sd,
        })
    }

    /// Mean and standard deviation of the conjugate normal posterior.
    pub fn posterior(&self) -> (f64, f64) {
        let prec =
            1.0 / (self.prior_sd * self.prior_sd) + self.y.len() as f64 / (self.sigma * self.sigma);
        let sum: f64 = self.y.iter().sum();
        let mean = (self.prior_mean / (self.prior_sd * self.prior_sd)
            + sum / (self.sigma * self.sigma))
            / prec;
        (mean, sqrt(1.0 / prec))
    }
}

impl Target for NormalMean {
    fn dim(&self) -> usize {
        1
    }

    fn log_density_grad(&self, x: &[f64], grad: &mut [f64]) -> Result<f64> {
        let mu = x[0];
        let s2 = self.sigma * self.sigma;
        let p2 = self.prior_sd * self.prior_sd;
        let mut lp = -0.5 * (mu - self.prior_mean) * (mu - self.prior_mean) / p2;
        let mut g = -(mu - self.prior_mean) / p2;
        for &y in &self.y {
            lp -= 0.5 * (y - mu) * (y - mu) / s2;
            g += (y - mu) / s2;
        }
        grad[0] = g;
        Ok(lp)
    }

    fn param_names(&self) -> Vec<String> {
        vec!["mu".into()]
    }
}
