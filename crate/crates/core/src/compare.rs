//! Predictive model comparison from pointwise log-likelihoods: WAIC,
//! Pareto-smoothed importance-sampling LOO and k-fold cross-validation.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::CodedDataset;
use crate::draws::PosteriorDraws;
use crate::error::{Error, Result};
use crate::math::{self, ceil, exp, expm1, floor, log, log1p, log_mean_exp, log_sum_exp, sqrt};
use crate::model::heldout_log_pred_density;

/// Pareto shape above which importance-sampling estimates are unreliable.
pub const KHAT_THRESHOLD: f64 = 0.7;

/// Draws needed before Pareto smoothing is attempted.
pub const MIN_PSIS_DRAWS: usize = 100;

/// Log-likelihood of each of `n_obs` observations under each of `n_draws`
/// posterior draws, stored row-major (`draw`, `obs`).
#[derive(Debug, Clone, PartialEq)]
pub struct LogLikMatrix {
    n_draws: usize,
    n_obs: usize,
    values: Vec<f64>,
}

impl LogLikMatrix {
    pub fn new(n_draws: usize, n_obs: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_draws * n_obs {
            return Err(Error::Dimension {
                expected: n_draws * n_obs,
                found: values.len(),
            });
        }
        if n_draws == 0 || n_obs == 0 {
            return Err(Error::TooFewSamples {
                required: 1,
                found: 0,
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLogLik {
                draw: pos / n_obs,
                obs: pos % n_obs,
            });
        }
        Ok(Self {
            n_draws,
            n_obs,
            values,
        })
    }

    /// Build from per-draw rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_obs = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != n_obs) {
            return Err(Error::Parameter(
                "log-likelihood rows differ in length".into(),
            ));
        }
        Self::new(rows.len(), n_obs, rows.concat())
    }

    pub fn n_draws(&self) -> usize {
        self.n_draws
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn get(&self, draw: usize, obs: usize) -> f64 {
        self.values[draw * self.n_obs + obs]
    }

    pub fn column(&self, obs: usize) -> Vec<f64> {
        self.values
            .iter()
            .skip(obs)
            .step_by(self.n_obs)
            .copied()
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ElpdMethod {
    Waic,
    PsisLoo,
    Kfold,
}

impl core::fmt::Display for ElpdMethod {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            ElpdMethod::Waic => "waic",
            ElpdMethod::PsisLoo => "psis_loo",
            ElpdMethod::Kfold => "kfold",
        })
    }
}

/// Expected log pointwise predictive density estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElpdResult {
    pub method: ElpdMethod,
    pub elpd: f64,
    pub se: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_eff: Option<f64>,
    pub pointwise: Vec<f64>,
    /// Pareto shape per observation; NaN where the tail was degenerate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub khat: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_bad_khat: Option<usize>,
    pub warnings: Vec<String>,
}

/// Standard error of a sum of `n` pointwise terms.
fn sum_se(pointwise: &[f64]) -> f64 {
    sqrt(pointwise.len() as f64 * math::sample_variance(pointwise))
}

impl ElpdResult {
    fn from_pointwise(method: ElpdMethod, pointwise: Vec<f64>) -> Self {
        Self {
            method,
            elpd: pointwise.iter().sum(),
            se: sum_se(&pointwise),
            p_eff: None,
            pointwise,
            khat: None,
            n_bad_khat: None,
            warnings: Vec::new(),
        }
    }
}

/// WAIC on the elpd scale. The penalty for each observation is the variance
/// of its log-likelihood over draws, with the `1/S` denominator.
pub fn waic(ll: &LogLikMatrix) -> Result<ElpdResult> {
    let mut pointwise = Vec::with_capacity(ll.n_obs());
    let mut p_eff = 0.0;
    for i in 0..ll.n_obs() {
        let col = ll.column(i);
        let penalty = math::population_variance(&col);
        p_eff += penalty;
        pointwise.push(log_mean_exp(&col) - penalty);
    }
    let mut r = ElpdResult::from_pointwise(ElpdMethod::Waic, pointwise);
    r.p_eff = Some(p_eff);
    Ok(r)
}

/// Generalized Pareto fit to positive exceedances sorted in ascending order,
/// by the empirical-Bayes profile method of Zhang and Stephens with a weak
/// prior pulling the shape toward 0.5. Returns `(k, sigma)`.
pub fn gpd_fit_tail(x: &[f64]) -> Result<(f64, f64)> {
    let n = x.len();
    if n < 5 {
        return Err(Error::TooFewSamples {
            required: 5,
            found: n,
        });
    }
    if x.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Parameter(
            "exceedances must be finite and non-negative".into(),
        ));
    }
    if x.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Parameter(
            "exceedances must be sorted ascending".into(),
        ));
    }
    if x[0] == x[n - 1] {
        return Err(Error::Parameter(
            "all exceedances are equal; no tail to fit".into(),
        ));
    }
    let nf = n as f64;
    let prior = 3.0;
    let m = 30 + floor(sqrt(nf)) as usize;
    let xstar = x[(floor(nf / 4.0 + 0.5) as usize).max(1) - 1];
    let x_max = x[n - 1];
    let theta: Vec<f64> = (1..=m)
        .map(|j| 1.0 / x_max + (1.0 - sqrt(m as f64 / (j as f64 - 0.5))) / prior / xstar)
        .collect();
    let profile: Vec<f64> = theta
        .iter()
        .map(|&t| {
            let b = -t;
            let k = x.iter().map(|&v| log1p(b * v)).sum::<f64>() / nf;
            let l = nf * (log(b / k) - k - 1.0);
            if l.is_nan() {
                f64::NEG_INFINITY
            } else {
                l
            }
        })
        .collect();
    let norm = log_sum_exp(&profile);
    if !norm.is_finite() {
        return Err(Error::Parameter("profile likelihood is degenerate".into()));
    }
    let theta_hat: f64 = theta
        .iter()
        .zip(&profile)
        .map(|(t, l)| t * exp(l - norm))
        .sum();
    let k = x.iter().map(|&v| log1p(-theta_hat * v)).sum::<f64>() / nf;
    let sigma = -k / theta_hat;
    let k = (k * nf + 0.5 * 10.0) / (nf + 10.0);
    if !k.is_finite() || !sigma.is_finite() {
        return Err(Error::Parameter(
            "generalized Pareto fit did not converge".into(),
        ));
    }
    Ok((k, sigma))
}

/// Quantile function of the generalized Pareto distribution.
fn gpd_quantile(p: f64, k: f64, sigma: f64) -> f64 {
    if k == 0.0 {
        -sigma * log1p(-p)
    } else {
        sigma * expm1(-k * log1p(-p)) / k
    }
}

/// Number of largest importance ratios replaced by the Pareto fit.
pub fn psis_tail_len(n_draws: usize) -> usize {
    let s = n_draws as f64;
    ceil((0.2 * s).min(3.0 * sqrt(s))) as usize
}

/// Pareto-smooth log importance weights in place (they are shifted so the
/// maximum is zero, smoothed, then truncated at that maximum). Returns the
/// shape estimate, or NaN when the tail is degenerate and left unsmoothed.
pub fn psis_smooth(lw: &mut [f64]) -> f64 {
    let s = lw.len();
    let max = lw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    lw.iter_mut().for_each(|v| *v -= max);
    let m = psis_tail_len(s);
    if m < 5 || m >= s {
        return f64::NAN;
    }
    let mut order: Vec<usize> = (0..s).collect();
    order.sort_by(|&a, &b| lw[a].total_cmp(&lw[b]));
    let cutoff = lw[order[s - m - 1]].max(log(f64::MIN_POSITIVE));
    let tail = &order[s - m..];
    let tail_vals: Vec<f64> = tail.iter().map(|&i| lw[i]).collect();
    if tail_vals.iter().all(|&v| v == tail_vals[0]) {
        return f64::NAN;
    }
    let exp_cutoff = exp(cutoff);
    let exceed: Vec<f64> = tail_vals
        .iter()
        .map(|&v| (exp(v) - exp_cutoff).max(0.0))
        .collect();
    let khat = match gpd_fit_tail(&exceed) {
        Ok((k, sigma)) => {
            for (j, &i) in tail.iter().enumerate() {
                let p = (j as f64 + 0.5) / m as f64;
                lw[i] = log(gpd_quantile(p, k, sigma) + exp_cutoff);
            }
            k
        }
        Err(_) => f64::INFINITY,
    };
    lw.iter_mut().for_each(|v| *v = v.min(0.0));
    khat
}

/// Leave-one-out elpd with Pareto-smoothed importance weights.
pub fn psis_loo(ll: &LogLikMatrix) -> Result<ElpdResult> {
    let s = ll.n_draws();
    if s < MIN_PSIS_DRAWS {
        return Err(Error::TooFewSamples {
            required: MIN_PSIS_DRAWS,
            found: s,
        });
    }
    let mut pointwise = Vec::with_capacity(ll.n_obs());
    let mut khats = Vec::with_capacity(ll.n_obs());
    let mut warnings = Vec::new();
    let mut n_bad = 0;
    let mut lppd = 0.0;
    for i in 0..ll.n_obs() {
        let col = ll.column(i);
        lppd += log_mean_exp(&col);
        let mut lw: Vec<f64> = col.iter().map(|v| -v).collect();
        let khat = psis_smooth(&mut lw);
        let weighted: Vec<f64> = lw.iter().zip(&col).map(|(w, l)| w + l).collect();
        pointwise.push(log_sum_exp(&weighted) - log_sum_exp(&lw));
        if khat.is_nan() {
            warnings.push(format!("observation {i}: importance ratios have a degenerate tail; weights left unsmoothed"));
        } else if khat > KHAT_THRESHOLD {
            n_bad += 1;
            warnings.push(format!(
                "observation {i}: Pareto k = {khat:.3} exceeds {KHAT_THRESHOLD}"
            ));
        }
        khats.push(khat);
    }
    let mut r = ElpdResult::from_pointwise(ElpdMethod::PsisLoo, pointwise);
    r.p_eff = Some(lppd - r.elpd);
    r.khat = Some(khats);
    r.n_bad_khat = Some(n_bad);
    r.warnings = warnings;
    Ok(r)
}

/// `sum(a - b)` and its standard error over aligned pointwise values.
pub fn elpd_difference(a: &ElpdResult, b: &ElpdResult) -> Result<(f64, f64)> {
    if a.pointwise.len() != b.pointwise.len() {
        return Err(Error::Dimension {
            expected: a.pointwise.len(),
            found: b.pointwise.len(),
        });
    }
    let d: Vec<f64> = a
        .pointwise
        .iter()
        .zip(&b.pointwise)
        .map(|(x, y)| x - y)
        .collect();
    Ok((d.iter().sum(), sum_se(&d)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub method: ElpdMethod,
    pub elpd: f64,
    pub se: f64,
    /// Difference from the best model (zero for the best, negative otherwise).
    pub elpd_diff: f64,
    pub se_diff: f64,
}

/// Rank models by elpd, best first. All results must cover the same
/// observations in the same order.
pub fn compare(results: &[(String, ElpdResult)]) -> Result<Vec<ComparisonRow>> {
    if results.is_empty() {
        return Err(Error::Parameter("nothing to compare".into()));
    }
    let n = results[0].1.pointwise.len();
    if let Some((name, r)) = results.iter().find(|(_, r)| r.pointwise.len() != n) {
        return Err(Error::Parameter(format!(
            "model `{name}` has {} pointwise values, expected {n}",
            r.pointwise.len()
        )));
    }
    let mut order: Vec<usize> = (0..results.len()).collect();
    order.sort_by(|&a, &b| results[b].1.elpd.total_cmp(&results[a].1.elpd));
    let best = &results[order[0]].1;
    order
        .into_iter()
        .map(|i| {
            let (name, r) = &results[i];
            let (diff, se_diff) = elpd_difference(r, best)?;
            Ok(ComparisonRow {
                model: name.clone(),
                method: r.method,
                elpd: r.elpd,
                se: r.se,
                elpd_diff: diff,
                se_diff,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FoldScheme {
    /// Observations are shuffled and dealt into folds.
    #[default]
    Random,
    /// Whole subjects are shuffled and dealt into folds.
    BySubject,
}

/// Fold index of each of `n_obs` observations: a seeded shuffle dealt
/// round-robin, so fold sizes differ by at most one.
pub fn kfold_partition(n_obs: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 || k > n_obs {
        return Err(Error::Parameter(format!(
            "k must satisfy 2 <= k <= {n_obs}, got {k}"
        )));
    }
    let mut perm: Vec<usize> = (0..n_obs).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![0; n_obs];
    for (pos, &i) in perm.iter().enumerate() {
        folds[i] = pos % k;
    }
    Ok(folds)
}

/// Fold index of each observation when whole subjects are held out together.
pub fn kfold_partition_by_subject(data: &CodedDataset, k: usize, seed: u64) -> Result<Vec<usize>> {
    let n_subj = data.n_subj();
    if k < 2 || k > n_subj {
        return Err(Error::Parameter(format!(
            "k must satisfy 2 <= k <= {n_subj} subjects, got {k}"
        )));
    }
    let subject_fold = kfold_partition(n_subj, k, seed)?;
    Ok(data.records.iter().map(|r| subject_fold[r.subj]).collect())
}

pub fn partition(
    data: &CodedDataset,
    scheme: FoldScheme,
    k: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    match scheme {
        FoldScheme::Random => kfold_partition(data.n_obs(), k, seed),
        FoldScheme::BySubject => kfold_partition_by_subject(data, k, seed),
    }
}

/// `(train, test)` observation indices of fold `f`.
pub fn fold_indices(folds: &[usize], f: usize) -> (Vec<usize>, Vec<usize>) {
    (0..folds.len()).partition(|&i| folds[i] != f)
}

/// Seed for the refit of fold `f`, kept well away from the chain offsets
/// added to the base seed.
pub fn fold_seed(base_seed: u64, f: usize) -> u64 {
    base_seed.wrapping_add(1000 * (f as u64 + 1))
}

/// Subjects and items with no training data in some fold. Their effects in
/// that fold are predicted from the population distribution alone.
pub fn fold_coverage_warnings(data: &CodedDataset, folds: &[usize], k: usize) -> Vec<String> {
    let mut out = Vec::new();
    for f in 0..k {
        let mut subj = vec![false; data.n_subj()];
        let mut item = vec![false; data.n_item()];
        for (r, &fold) in data.records.iter().zip(folds) {
            if fold != f {
                subj[r.subj] = true;
                item[r.item] = true;
            }
        }
        let missing_s: Vec<&str> = subj
            .iter()
            .enumerate()
            .filter(|(_, &seen)| !seen)
            .map(|(j, _)| data.subj_labels[j].as_str())
            .collect();
        let missing_i: Vec<&str> = item
            .iter()
            .enumerate()
            .filter(|(_, &seen)| !seen)
            .map(|(j, _)| data.item_labels[j].as_str())
            .collect();
        if !missing_s.is_empty() {
            out.push(format!(
                "fold {f}: no training data for subjects {}",
                missing_s.join(", ")
            ));
        }
        if !missing_i.is_empty() {
            out.push(format!(
                "fold {f}: no training data for items {}",
                missing_i.join(", ")
            ));
        }
    }
    out
}

/// Put per-fold held-out scores back in observation order.
pub fn kfold_assemble(folds: &[usize], k: usize, per_fold: Vec<Vec<f64>>) -> Result<ElpdResult> {
    if per_fold.len() != k {
        return Err(Error::Dimension {
            expected: k,
            found: per_fold.len(),
        });
    }
    let mut pointwise = vec![f64::NAN; folds.len()];
    for (f, scores) in per_fold.into_iter().enumerate() {
        let (_, test) = fold_indices(folds, f);
        if scores.len() != test.len() {
            return Err(Error::Dimension {
                expected: test.len(),
                found: scores.len(),
            });
        }
        for (i, s) in test.into_iter().zip(scores) {
            pointwise[i] = s;
        }
    }
    if let Some(i) = pointwise.iter().position(|v| !v.is_finite()) {
        return Err(Error::Parameter(format!(
            "observation {i} has no finite held-out score"
        )));
    }
    Ok(ElpdResult::from_pointwise(ElpdMethod::Kfold, pointwise))
}

/// k-fold cross-validation with a caller-supplied scorer: `score(f, train,
/// test)` returns the log predictive density of each `test` observation
/// given a fit to `train`. Folds run in order.
pub fn kfold_with<F>(folds: &[usize], k: usize, mut score: F) -> Result<ElpdResult>
where
    F: FnMut(usize, &[usize], &[usize]) -> Result<Vec<f64>>,
{
    let per_fold = (0..k)
        .map(|f| {
            let (train, test) = fold_indices(folds, f);
            score(f, &train, &test)
        })
        .collect::<Result<Vec<_>>>()?;
    kfold_assemble(folds, k, per_fold)
}

/// Held-out scores for fold `f` of the mixed model: `fit` is called on the
/// training subset (which keeps every subject and item level).
pub fn kfold_fold_scores<F>(
    data: &CodedDataset,
    folds: &[usize],
    f: usize,
    fit: F,
) -> Result<Vec<f64>>
where
    F: FnOnce(&CodedDataset) -> Result<PosteriorDraws>,
{
    let (train, test) = fold_indices(folds, f);
    let draws = fit(&data.subset(&train))?;
    heldout_log_pred_density(&draws, data, &test)
}

/// Sequential k-fold cross-validation of the mixed model. `fit(f, train)`
/// must return draws for the training data of fold `f`.
pub fn kfold_cv<F>(data: &CodedDataset, folds: &[usize], k: usize, mut fit: F) -> Result<ElpdResult>
where
    F: FnMut(usize, &CodedDataset) -> Result<PosteriorDraws>,
{
    let per_fold = (0..k)
        .map(|f| kfold_fold_scores(data, folds, f, |train| fit(f, train)))
        .collect::<Result<Vec<_>>>()?;
    let mut r = kfold_assemble(folds, k, per_fold)?;
    r.warnings = fold_coverage_warnings(data, folds, k);
    Ok(r)
}
