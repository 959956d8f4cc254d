//! Bayes factors: binomial marginal likelihoods, the Savage–Dickey density
//! ratio, and the conjugate beta-binomial update.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::density::density_at_point;
use crate::error::{Error, Result};
use crate::math::{choose, exp, fabs, ln_beta, log, log1p, pow};
use crate::model::NormalPrior;

/// `k` successes in `n` trials. `n = 0` is allowed and means "no data".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinomialExperiment {
    pub n: u64,
    pub k: u64,
}

impl BinomialExperiment {
    pub fn new(n: u64, k: u64) -> Result<Self> {
        if k > n {
            return Err(Error::Parameter(format!(
                "successes k = {k} exceed trials n = {n}"
            )));
        }
        Ok(Self { n, k })
    }
}

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "probability must lie in [0, 1], got {p}"
        )))
    }
}

/// Binomial probability of the observed outcome at success probability `p`.
pub fn binomial_marginal_point(exp: BinomialExperiment, p: f64) -> Result<f64> {
    BinomialExperiment::new(exp.n, exp.k)?;
    check_probability(p)?;
    Ok(choose(exp.n, exp.k) * pow(p, exp.k as f64) * pow(1.0 - p, (exp.n - exp.k) as f64))
}

/// Prior mass on a finite set of success probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretePrior {
    pub support: Vec<f64>,
    pub weights: Vec<f64>,
}

impl DiscretePrior {
    pub fn new(support: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let prior = Self { support, weights };
        prior.validate()?;
        Ok(prior)
    }

    pub fn validate(&self) -> Result<()> {
        if self.support.is_empty() || self.support.len() != self.weights.len() {
            return Err(Error::Parameter(
                "prior needs matching, non-empty support and weights".into(),
            ));
        }
        for &p in &self.support {
            check_probability(p)?;
        }
        for (i, a) in self.support.iter().enumerate() {
            if self.support[..i].contains(a) {
                return Err(Error::Parameter(format!("support point {a} appears twice")));
            }
        }
        if self.weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::Parameter(
                "prior weights must be non-negative".into(),
            ));
        }
        let total: f64 = self.weights.iter().sum();
        if fabs(total - 1.0) > 1e-9 {
            return Err(Error::Parameter(format!(
                "prior weights sum to {total}, not 1"
            )));
        }
        Ok(())
    }
}

/// Marginal likelihood under a discrete prior: the prior-weighted sum of the
/// point likelihoods.
pub fn binomial_marginal_mixture(exp: BinomialExperiment, prior: &DiscretePrior) -> Result<f64> {
    prior.validate()?;
    let mut total = 0.0;
    for (&p, &w) in prior.support.iter().zip(&prior.weights) {
        total += w * binomial_marginal_point(exp, p)?;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BayesFactorMethod {
    ClosedForm,
    SavageDickey,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BayesFactorResult {
    pub bf01: f64,
    pub numerator: String,
    pub denominator: String,
    pub method: BayesFactorMethod,
    pub interpretation: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior: Option<NormalPrior>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<f64>,
}

/// Verbal label on the usual Jeffreys-style scale, stated for whichever
/// model the factor favours.
pub fn jeffreys_label(bf01: f64) -> String {
    if bf01 == 1.0 {
        return "no evidence either way".into();
    }
    let (strength, favoured) = if bf01 > 1.0 {
        (bf01, "M0")
    } else {
        (1.0 / bf01, "M1")
    };
    let word = if strength < 3.0 {
        "anecdotal"
    } else if strength < 10.0 {
        "moderate"
    } else if strength < 30.0 {
        "strong"
    } else if strength < 100.0 {
        "very strong"
    } else {
        "extreme"
    };
    format!("{word} evidence for {favoured}")
}

/// `BF01 = m0 / m1` from two marginal likelihoods.
pub fn bayes_factor(m0: f64, m1: f64) -> Result<BayesFactorResult> {
    bayes_factor_described(m0, m1, "M0", "M1")
}

pub fn bayes_factor_described(
    m0: f64,
    m1: f64,
    numerator: &str,
    denominator: &str,
) -> Result<BayesFactorResult> {
    if !(m0 > 0.0 && m1 > 0.0 && m0.is_finite() && m1.is_finite()) {
        return Err(Error::Evidence(format!(
            "marginal likelihoods must be positive and finite, got {m0} and {m1}"
        )));
    }
    let bf01 = m0 / m1;
    if !(bf01 > 0.0 && bf01.is_finite()) {
        return Err(Error::Evidence(format!(
            "Bayes factor {m0}/{m1} is not representable"
        )));
    }
    Ok(BayesFactorResult {
        bf01,
        numerator: numerator.into(),
        denominator: denominator.into(),
        method: BayesFactorMethod::ClosedForm,
        interpretation: jeffreys_label(bf01),
        prior: None,
        point: None,
    })
}

/// Savage–Dickey ratio for a point null nested in a model with a normal
/// prior: posterior density at `point` (kernel estimate) over prior density.
pub fn savage_dickey_bf(
    samples: &[f64],
    prior: NormalPrior,
    point: f64,
) -> Result<BayesFactorResult> {
    prior.validate()?;
    let prior_density = prior.pdf(point);
    if !(prior_density >= f64::MIN_POSITIVE) {
        return Err(Error::Evidence(format!(
            "prior {prior} has density {prior_density:e} at {point}; the ratio is numerically undefined. \
             Use a prior that puts appreciable mass near the tested value"
        )));
    }
    let posterior_density = density_at_point(samples, point)?;
    if !(posterior_density > 0.0) {
        return Err(Error::Evidence(format!(
            "estimated posterior density at {point} is zero; no draws lie near the tested value"
        )));
    }
    let bf01 = posterior_density / prior_density;
    Ok(BayesFactorResult {
        bf01,
        numerator: format!("slope = {point}"),
        denominator: format!("slope ~ {prior}"),
        method: BayesFactorMethod::SavageDickey,
        interpretation: jeffreys_label(bf01),
        prior: Some(prior),
        point: Some(point),
    })
}

fn beta_lpdf(p: f64, a: f64, b: f64) -> f64 {
    (a - 1.0) * log(p) + (b - 1.0) * log1p(-p) - ln_beta(a, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaGridPoint {
    pub p: f64,
    pub prior: f64,
    /// Likelihood rescaled to integrate to one over `p`.
    pub likelihood: f64,
    pub posterior: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaBinomialPosterior {
    pub prior_a: f64,
    pub prior_b: f64,
    pub posterior_a: f64,
    pub posterior_b: f64,
    pub posterior_mean: f64,
    pub experiment: BinomialExperiment,
    pub grid: Vec<BetaGridPoint>,
}

impl BetaBinomialPosterior {
    /// Ratio `posterior / (prior * likelihood)`, the same at every grid point.
    pub fn normalizing_constant(&self) -> f64 {
        let (n, k) = (self.experiment.n as f64, self.experiment.k as f64);
        exp(
            ln_beta(self.prior_a, self.prior_b) + ln_beta(k + 1.0, n - k + 1.0)
                - ln_beta(self.posterior_a, self.posterior_b),
        )
    }
}

/// Conjugate update of a Beta(a, b) prior, with densities tabulated at the
/// midpoints of `grid_points` equal cells of (0, 1).
pub fn beta_binomial_posterior(
    a: f64,
    b: f64,
    exp: BinomialExperiment,
    grid_points: usize,
) -> Result<BetaBinomialPosterior> {
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err(Error::Parameter(format!(
            "Beta({a}, {b}) needs positive finite shapes"
        )));
    }
    BinomialExperiment::new(exp.n, exp.k)?;
    if grid_points == 0 {
        return Err(Error::Parameter("grid needs at least one point".into()));
    }
    let (n, k) = (exp.n as f64, exp.k as f64);
    let (pa, pb) = (a + k, b + n - k);
    let grid = (0..grid_points)
        .map(|i| {
            let p = (i as f64 + 0.5) / grid_points as f64;
            BetaGridPoint {
                p,
                prior: crate::math::exp(beta_lpdf(p, a, b)),
                likelihood: crate::math::exp(beta_lpdf(p, k + 1.0, n - k + 1.0)),
                posterior: crate::math::exp(beta_lpdf(p, pa, pb)),
            }
        })
        .collect();
    Ok(BetaBinomialPosterior {
        prior_a: a,
        prior_b: b,
        posterior_a: pa,
        posterior_b: pb,
        posterior_mean: pa / (pa + pb),
        experiment: exp,
        grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn coin(n: u64, k: u64) -> BinomialExperiment {
        BinomialExperiment::new(n, k).unwrap()
    }

    #[test]
    fn point_marginals() {
        assert_eq!(binomial_marginal_point(coin(5, 4), 0.5).unwrap(), 0.15625);
        assert_relative_eq!(
            binomial_marginal_point(coin(5, 4), 0.8).unwrap(),
            0.4096,
            epsilon = 1e-15
        );
        assert_eq!(binomial_marginal_point(coin(7, 7), 1.0).unwrap(), 1.0);
        assert!(binomial_marginal_point(coin(5, 4), 1.2).is_err());
        assert!(BinomialExperiment::new(3, 4).is_err());
    }

    #[test]
    fn outcomes_sum_to_one() {
        for n in 1..=12 {
            let total: f64 = (0..=n)
                .map(|k| binomial_marginal_point(coin(n, k), 0.37).unwrap())
                .sum();
            assert_relative_eq!(total, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn mixture_marginals() {
        let prior = DiscretePrior::new(vec![0.1, 0.8], vec![0.4, 0.6]).unwrap();
        assert_relative_eq!(
            binomial_marginal_mixture(coin(5, 4), &prior).unwrap(),
            0.24594,
            epsilon = 1e-12
        );
        let atom = DiscretePrior::new(vec![0.5], vec![1.0]).unwrap();
        assert_eq!(
            binomial_marginal_mixture(coin(5, 4), &atom).unwrap(),
            0.15625
        );
        let ends = DiscretePrior::new(vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(binomial_marginal_mixture(coin(5, 4), &ends).unwrap(), 0.0);
        assert!(DiscretePrior::new(vec![0.2, 0.2], vec![0.5, 0.5]).is_err());
        assert!(DiscretePrior::new(vec![0.2, 0.3], vec![0.5, 0.6]).is_err());
    }

    #[test]
    fn closed_form_bayes_factors() {
        let bf = bayes_factor(0.15625, 0.4096).unwrap();
        assert_relative_eq!(bf.bf01, 0.3815, epsilon = 1e-4);
        assert_eq!(bf.method, BayesFactorMethod::ClosedForm);
        assert_relative_eq!(
            bayes_factor(0.3125, 0.0512).unwrap().bf01,
            6.1035,
            epsilon = 1e-4
        );
        assert_eq!(bayes_factor(0.2, 0.2).unwrap().bf01, 1.0);
        assert!(bayes_factor(0.0, 0.2).is_err());
        let r = bayes_factor(0.3, 0.7).unwrap().bf01 * bayes_factor(0.7, 0.3).unwrap().bf01;
        assert_relative_eq!(r, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn labels() {
        assert_eq!(jeffreys_label(15.0), "strong evidence for M0");
        assert_eq!(jeffreys_label(0.38), "anecdotal evidence for M1");
        assert_eq!(jeffreys_label(1.0), "no evidence either way");
    }

    fn draws(n: usize, mean: f64, sd: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(mean, sd).unwrap();
        (0..n).map(|_| d.sample(&mut rng)).collect()
    }

    #[test]
    fn savage_dickey_without_updating_is_one() {
        let prior = NormalPrior { mean: 0.0, sd: 1.0 };
        let bf = savage_dickey_bf(&draws(100_000, 0.0, 1.0, 1), prior, 0.0).unwrap();
        assert!((bf.bf01 - 1.0).abs() < 0.05, "{}", bf.bf01);
    }

    #[test]
    fn savage_dickey_matches_conjugate_normal() {
        // ybar ~ N(mu, se), mu ~ N(0, tau): the exact BF01 is the ratio of
        // marginal densities of ybar under the two models.
        let (ybar, se, tau): (f64, f64, f64) = (0.3, 0.1, 1.0);
        let post_var = 1.0 / (1.0 / (tau * tau) + 1.0 / (se * se));
        let post_mean = post_var * ybar / (se * se);
        let exact = crate::math::normal_pdf(ybar, 0.0, se)
            / crate::math::normal_pdf(ybar, 0.0, (tau * tau + se * se).sqrt());
        let samples = draws(100_000, post_mean, post_var.sqrt(), 2);
        let bf = savage_dickey_bf(&samples, NormalPrior { mean: 0.0, sd: tau }, 0.0).unwrap();
        assert!(
            (bf.bf01 / exact - 1.0).abs() < 0.1,
            "{} vs {exact}",
            bf.bf01
        );
    }

    #[test]
    fn savage_dickey_normal_approximation() {
        let samples = draws(1_000_000, -0.036, 0.0306, 3);
        let bf = savage_dickey_bf(&samples, NormalPrior { mean: 0.0, sd: 1.0 }, 0.0).unwrap();
        let oracle =
            crate::math::normal_pdf(0.0, -0.036, 0.0306) / crate::math::normal_pdf(0.0, 0.0, 1.0);
        assert!(
            (bf.bf01 / oracle - 1.0).abs() < 0.05,
            "{} vs {oracle}",
            bf.bf01
        );
    }

    #[test]
    fn savage_dickey_underflow_is_reported() {
        let err = savage_dickey_bf(
            &draws(200, 0.0, 1.0, 4),
            NormalPrior {
                mean: 100.0,
                sd: 0.1,
            },
            0.0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Evidence(_)));
    }

    #[test]
    fn conjugate_update() {
        let post = beta_binomial_posterior(1.0, 1.0, coin(10, 4), 101).unwrap();
        assert_eq!((post.posterior_a, post.posterior_b), (5.0, 7.0));
        assert_relative_eq!(post.posterior_mean, 5.0 / 12.0);

        let c = post.normalizing_constant();
        for g in &post.grid {
            assert_relative_eq!(g.posterior, c * g.prior * g.likelihood, max_relative = 1e-8);
        }

        let none = beta_binomial_posterior(1.0, 1.0, coin(0, 0), 50).unwrap();
        assert!(none.grid.iter().all(|g| g.posterior == g.prior));
        let none = beta_binomial_posterior(10.0, 10.0, coin(0, 0), 50).unwrap();
        assert!(none.grid.iter().all(|g| g.posterior == g.prior));
    }

    #[test]
    fn more_data_pulls_posterior_to_likelihood() {
        let small = beta_binomial_posterior(10.0, 10.0, coin(10, 4), 11).unwrap();
        let large = beta_binomial_posterior(10.0, 10.0, coin(100, 40), 11).unwrap();
        assert_eq!((large.posterior_a, large.posterior_b), (50.0, 70.0));
        assert!((large.posterior_mean - 0.4).abs() < (small.posterior_mean - 0.4).abs());
    }
}
