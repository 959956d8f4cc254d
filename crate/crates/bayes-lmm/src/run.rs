//! Multi-threaded orchestration: chains, prior sweeps and fold refits run as
//! independent rayon jobs and are merged in index order, so results do not
//! depend on the number of threads.

use bayes_lmm_core::analysis::SensitivityRow;
use bayes_lmm_core::compare::{
    fold_coverage_warnings, fold_seed, kfold_assemble, kfold_fold_scores, partition, ElpdResult,
    FoldScheme,
};
use bayes_lmm_core::evidence::{savage_dickey_bf, BayesFactorResult};
use bayes_lmm_core::sampler::{merge_chains, run_chain};
use bayes_lmm_core::{
    CodedDataset, Error, LmmPosterior, ModelSpec, NormalPrior, PosteriorDraws, PriorSpec, Result,
};
use bayes_lmm_core::{SamplerConfig, Target};
use rayon::prelude::*;

/// Names of the fixed effects checked by the convergence gate.
pub const FIXED_EFFECTS: [&str; 2] = ["intercept", "cond"];

pub fn thread_pool(
    threads: Option<usize>,
) -> std::result::Result<rayon::ThreadPool, rayon::ThreadPoolBuildError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n);
    }
    b.build()
}

/// All chains in parallel; identical output to the sequential runner.
pub fn sample<T: Target + Sync>(target: &T, config: &SamplerConfig) -> Result<PosteriorDraws> {
    config.validate()?;
    let results: Vec<_> = (0..config.chains)
        .into_par_iter()
        .map(|c| run_chain(target, config, c))
        .collect();
    merge_chains(target.param_names(), results)
}

pub fn fit(data: &CodedDataset, spec: ModelSpec, config: &SamplerConfig) -> Result<PosteriorDraws> {
    let posterior = LmmPosterior::new(data, spec)?;
    sample(&posterior, config)
}

/// Largest R-hat over the fixed effects present in `draws`.
pub fn max_fixed_rhat(draws: &PosteriorDraws) -> Option<f64> {
    let present: Vec<&str> = FIXED_EFFECTS
        .iter()
        .copied()
        .filter(|n| draws.param_index(n).is_ok())
        .collect();
    draws.max_rhat(&present).ok().flatten()
}

/// Refit with each slope prior; failed fits become flagged rows.
pub fn sensitivity_sweep(
    data: &CodedDataset,
    base: PriorSpec,
    priors: &[NormalPrior],
    config: &SamplerConfig,
) -> Vec<SensitivityRow> {
    priors
        .par_iter()
        .map(|&prior| {
            let row =
                fit(data, ModelSpec::full(base.with_slope(prior)), config).and_then(|draws| {
                    SensitivityRow::from_samples(
                        prior,
                        &draws.column_by_name("cond")?,
                        max_fixed_rhat(&draws),
                    )
                });
            row.unwrap_or_else(|e| SensitivityRow::failed(prior, e.to_string()))
        })
        .collect()
}

/// Savage–Dickey Bayes factor for `cond = point` under each slope prior,
/// refitting the model once per prior.
pub fn savage_dickey_refits(
    data: &CodedDataset,
    base: PriorSpec,
    priors: &[NormalPrior],
    point: f64,
    config: &SamplerConfig,
) -> Vec<Result<BayesFactorResult>> {
    priors
        .par_iter()
        .map(|&prior| {
            let draws = fit(data, ModelSpec::full(base.with_slope(prior)), config)?;
            savage_dickey_bf(&draws.column_by_name("cond")?, prior, point)
        })
        .collect()
}

/// k-fold cross-validation with folds refitted in parallel. Fold `f` samples
/// with its own base seed so folds are independent.
pub fn kfold(
    data: &CodedDataset,
    spec: ModelSpec,
    config: &SamplerConfig,
    k: usize,
    scheme: FoldScheme,
    seed: u64,
) -> Result<ElpdResult> {
    let folds = partition(data, scheme, k, seed)?;
    let per_fold: Vec<Result<Vec<f64>>> = (0..k)
        .into_par_iter()
        .map(|f| {
            let cfg = SamplerConfig {
                base_seed: fold_seed(config.base_seed, f),
                ..*config
            };
            kfold_fold_scores(data, &folds, f, |train| fit(train, spec, &cfg))
        })
        .collect();
    let mut scores = Vec::with_capacity(k);
    let mut failures = Vec::new();
    for (f, r) in per_fold.into_iter().enumerate() {
        match r {
            Ok(s) => scores.push(s),
            Err(e) => failures.push(format!("fold {f}: {e}")),
        }
    }
    if !failures.is_empty() {
        return Err(Error::Sampler(failures.join("; ")));
    }
    let mut result = kfold_assemble(&folds, k, scores)?;
    result.warnings = fold_coverage_warnings(data, &folds, k);
    Ok(result)
}
