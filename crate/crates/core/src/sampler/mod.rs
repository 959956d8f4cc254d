//! Dynamic-trajectory Hamiltonian Monte Carlo.
//!
//! Each chain runs the multinomial No-U-Turn transition with a diagonal
//! metric. Warmup adapts the step size by dual averaging toward
//! `target_accept` and estimates the metric in doubling windows between an
//! initial and a terminal fast phase.

mod adapt;
pub mod diagnostics;
mod nuts;
pub mod targets;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::draws::PosteriorDraws;
use crate::error::{Error, Result};

use adapt::{StepSizeAdapter, WindowedVariance};
use nuts::{Hamiltonian, PhasePoint, Transition};

/// A log density with gradient over an unconstrained real vector.
pub trait Target {
    fn dim(&self) -> usize;

    /// Fill `grad` and return the log density. Non-finite evaluations must be
    /// reported as [`Error::NonFinite`] rather than returned as values.
    fn log_density_grad(&self, position: &[f64], grad: &mut [f64]) -> Result<f64>;

    /// Names of the constrained-scale parameters written by [`Target::constrained`].
    fn param_names(&self) -> Vec<String> {
        (0..self.dim()).map(|i| format!("x{i}")).collect()
    }

    /// Append the constrained-scale representation of `position` to `out`.
    fn constrained(&self, position: &[f64], out: &mut Vec<f64>) {
        out.extend_from_slice(position);
    }
}

impl<T: Target + ?Sized> Target for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn log_density_grad(&self, position: &[f64], grad: &mut [f64]) -> Result<f64> {
        (**self).log_density_grad(position, grad)
    }

    fn param_names(&self) -> Vec<String> {
        (**self).param_names()
    }

    fn constrained(&self, position: &[f64], out: &mut Vec<f64>) {
        (**self).constrained(position, out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub chains: usize,
    /// Total iterations per chain, warmup included.
    pub iter: usize,
    pub warmup: usize,
    pub target_accept: f64,
    pub max_tree_depth: usize,
    pub base_seed: u64,
    /// Initial values are drawn uniformly from `(-init_radius, init_radius)`
    /// on the unconstrained scale.
    pub init_radius: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            chains: 4,
            iter: 2000,
            warmup: 1000,
            target_accept: 0.8,
            max_tree_depth: 10,
            base_seed: 1,
            init_radius: 2.0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        if self.chains == 0 {
            return bad("chains must be at least 1".into());
        }
        if self.warmup >= self.iter {
            return bad(format!(
                "warmup ({}) must be less than iter ({})",
                self.warmup, self.iter
            ));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return bad(format!(
                "target_accept must lie in (0, 1), got {}",
                self.target_accept
            ));
        }
        if self.max_tree_depth == 0 {
            return bad("max_tree_depth must be at least 1".into());
        }
        if !(self.init_radius >= 0.0 && self.init_radius.is_finite()) {
            return bad(format!(
                "init_radius must be non-negative, got {}",
                self.init_radius
            ));
        }
        Ok(())
    }

    pub fn draws_per_chain(&self) -> usize {
        self.iter - self.warmup
    }

    pub fn chain_seed(&self, chain: usize) -> u64 {
        self.base_seed.wrapping_add(chain as u64)
    }
}

/// Post-warmup output of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput {
    pub chain: usize,
    /// Constrained-scale draws, row-major `draws x params`.
    pub values: Vec<f64>,
    pub n_draws: usize,
    /// Divergent post-warmup transitions.
    pub divergences: usize,
    pub warmup_divergences: usize,
    pub step_size: f64,
    pub inv_metric: Vec<f64>,
    pub mean_accept_stat: f64,
    pub mean_tree_depth: f64,
    pub max_depth_hits: usize,
    pub n_leapfrog: usize,
}

const MAX_INIT_ATTEMPTS: usize = 100;
const MAX_CONSECUTIVE_DIVERGENCES: usize = 100;

/// Run one chain. The RNG is seeded with `base_seed + chain`, so the output
/// depends only on the target, the config and the chain index.
pub fn run_chain<T: Target>(
    target: &T,
    config: &SamplerConfig,
    chain: usize,
) -> Result<ChainOutput> {
    config.validate()?;
    let dim = target.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(config.chain_seed(chain));
    let ham = Hamiltonian::new(target, vec![1.0; dim]);

    let mut point = initial_point(&ham, config.init_radius, &mut rng)?;
    let mut step_size = ham.init_step_size(&point, 1.0, &mut rng)?;

    let mut step_adapter = StepSizeAdapter::new(config.target_accept, step_size);
    let mut metric_adapter = WindowedVariance::new(dim, config.warmup);

    let n_draws = config.draws_per_chain();
    let mut values = Vec::with_capacity(n_draws * dim);
    let mut out = ChainOutput {
        chain,
        values: Vec::new(),
        n_draws,
        divergences: 0,
        warmup_divergences: 0,
        step_size,
        inv_metric: Vec::new(),
        mean_accept_stat: 0.0,
        mean_tree_depth: 0.0,
        max_depth_hits: 0,
        n_leapfrog: 0,
    };
    let mut ham = ham;
    let mut consecutive_divergent = 0;
    let (mut accept_sum, mut depth_sum) = (0.0, 0.0);

    for it in 0..config.iter {
        let warming = it < config.warmup;
        let t: Transition = ham.transition(&point, step_size, config.max_tree_depth, &mut rng);
        point = t.point;
        out.n_leapfrog += t.n_leapfrog;

        if t.divergent {
            consecutive_divergent += 1;
            if warming {
                out.warmup_divergences += 1;
            } else {
                out.divergences += 1;
            }
            if consecutive_divergent >= MAX_CONSECUTIVE_DIVERGENCES {
                return Err(Error::Sampler(format!(
                    "{MAX_CONSECUTIVE_DIVERGENCES} consecutive divergent transitions at iteration {it}"
                )));
            }
        } else {
            consecutive_divergent = 0;
        }

        if warming {
            step_size = step_adapter.update(t.accept_stat);
            if metric_adapter.observe(&point.q) {
                ham.set_inv_metric(metric_adapter.variance().to_vec());
                step_size = ham.init_step_size(&point, step_size, &mut rng)?;
                step_adapter.restart(step_size);
            }
            if it + 1 == config.warmup {
                step_size = step_adapter.final_step_size();
            }
        } else {
            accept_sum += t.accept_stat;
            depth_sum += t.depth as f64;
            if t.depth >= config.max_tree_depth {
                out.max_depth_hits += 1;
            }
            target.constrained(&point.q, &mut values);
        }
    }

    out.values = values;
    out.step_size = step_size;
    out.inv_metric = ham.inv_metric().to_vec();
    if n_draws > 0 {
        out.mean_accept_stat = accept_sum / n_draws as f64;
        out.mean_tree_depth = depth_sum / n_draws as f64;
    }
    Ok(out)
}

fn initial_point<T: Target>(
    ham: &Hamiltonian<'_, T>,
    radius: f64,
    rng: &mut ChaCha8Rng,
) -> Result<PhasePoint> {
    let dim = ham.dim();
    for _ in 0..MAX_INIT_ATTEMPTS {
        let q: Vec<f64> = if radius > 0.0 {
            (0..dim)
                .map(|_| rng.random_range(-radius..radius))
                .collect()
        } else {
            vec![0.0; dim]
        };
        if let Ok(point) = ham.point_at(q) {
            if point.grad.iter().all(|g| g.is_finite()) {
                return Ok(point);
            }
        }
    }
    Err(Error::Sampler(format!(
        "no finite initial point found in {MAX_INIT_ATTEMPTS} attempts within radius {radius}"
    )))
}

/// Run every chain in index order on the current thread and merge them.
pub fn run_chains<T: Target>(target: &T, config: &SamplerConfig) -> Result<PosteriorDraws> {
    let results = (0..config.chains)
        .map(|c| run_chain(target, config, c))
        .collect();
    merge_chains(target.param_names(), results)
}

/// Merge per-chain results in the order given. Any failures are reported
/// together.
pub fn merge_chains(
    names: Vec<String>,
    results: Vec<Result<ChainOutput>>,
) -> Result<PosteriorDraws> {
    let mut failures = Vec::new();
    let mut chains = Vec::with_capacity(results.len());
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(c) => chains.push(c),
            Err(e) => failures.push((i, format!("{e}"))),
        }
    }
    if !failures.is_empty() {
        return Err(Error::Chains(failures));
    }
    PosteriorDraws::from_chains(names, chains)
}
