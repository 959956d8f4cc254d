use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampler::diagnostics::{ess, rhat};
use crate::sampler::ChainOutput;

/// Convergence diagnostics for one parameter. `None` means undefined: a
/// single chain for R-hat, too few draws, or a parameter with no variance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamDiagnostics {
    pub rhat: Option<f64>,
    pub ess: Option<f64>,
}

/// Per-chain sampler statistics kept alongside the draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStats {
    pub chain: usize,
    pub step_size: f64,
    pub divergences: usize,
    pub warmup_divergences: usize,
    pub mean_accept_stat: f64,
    pub mean_tree_depth: f64,
    pub max_depth_hits: usize,
    pub n_leapfrog: usize,
}

/// Post-warmup draws from all chains, concatenated in chain order.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub names: Vec<String>,
    /// Row-major `n_draws x n_params`.
    pub values: Vec<f64>,
    pub chain_ids: Vec<usize>,
    /// Post-warmup iteration index within the chain, starting at 0.
    pub iterations: Vec<usize>,
    pub divergence_count: usize,
    pub diagnostics: Vec<ParamDiagnostics>,
    pub chain_stats: Vec<ChainStats>,
}

impl PosteriorDraws {
    pub fn from_chains(names: Vec<String>, chains: Vec<ChainOutput>) -> Result<Self> {
        let p = names.len();
        let total: usize = chains.iter().map(|c| c.n_draws).sum();
        let mut values = Vec::with_capacity(total * p);
        let mut chain_ids = Vec::with_capacity(total);
        let mut iterations = Vec::with_capacity(total);
        let mut stats = Vec::with_capacity(chains.len());
        for c in chains {
            if c.values.len() != c.n_draws * p {
                return Err(Error::Dimension {
                    expected: c.n_draws * p,
                    found: c.values.len(),
                });
            }
            values.extend_from_slice(&c.values);
            chain_ids.extend(core::iter::repeat_n(c.chain, c.n_draws));
            iterations.extend(0..c.n_draws);
            stats.push(ChainStats {
                chain: c.chain,
                step_size: c.step_size,
                divergences: c.divergences,
                warmup_divergences: c.warmup_divergences,
                mean_accept_stat: c.mean_accept_stat,
                mean_tree_depth: c.mean_tree_depth,
                max_depth_hits: c.max_depth_hits,
                n_leapfrog: c.n_leapfrog,
            });
        }
        let mut draws = Self::from_parts(names, values, chain_ids, iterations)?;
        draws.divergence_count = stats.iter().map(|s| s.divergences).sum();
        draws.chain_stats = stats;
        Ok(draws)
    }

    /// Assemble draws from raw columns, e.g. when reading them back from a
    /// file. Diagnostics are recomputed; sampler statistics are unknown.
    pub fn from_parts(
        names: Vec<String>,
        values: Vec<f64>,
        chain_ids: Vec<usize>,
        iterations: Vec<usize>,
    ) -> Result<Self> {
        let p = names.len();
        let s = chain_ids.len();
        if p == 0 || s == 0 {
            return Err(Error::TooFewSamples {
                required: 1,
                found: s,
            });
        }
        if values.len() != s * p {
            return Err(Error::Dimension {
                expected: s * p,
                found: values.len(),
            });
        }
        if iterations.len() != s {
            return Err(Error::Dimension {
                expected: s,
                found: iterations.len(),
            });
        }
        let mut draws = Self {
            names,
            values,
            chain_ids,
            iterations,
            divergence_count: 0,
            diagnostics: Vec::new(),
            chain_stats: Vec::new(),
        };
        draws.diagnostics = (0..p).map(|j| draws.compute_diagnostics(j)).collect();
        Ok(draws)
    }

    fn compute_diagnostics(&self, j: usize) -> ParamDiagnostics {
        let chains = self.chain_columns(j);
        let refs: Vec<&[f64]> = chains.iter().map(|c| c.as_slice()).collect();
        let ok = |d: Result<crate::sampler::diagnostics::Diagnostic>| match d {
            Ok(d) if !d.degenerate => Some(d.value),
            _ => None,
        };
        ParamDiagnostics {
            rhat: ok(rhat(&refs)),
            ess: ok(ess(&refs)),
        }
    }

    pub fn n_draws(&self) -> usize {
        self.chain_ids.len()
    }

    pub fn n_params(&self) -> usize {
        self.names.len()
    }

    pub fn n_chains(&self) -> usize {
        let mut ids = self.chain_ids.clone();
        ids.dedup();
        ids.len()
    }

    pub fn row(&self, s: usize) -> &[f64] {
        let p = self.n_params();
        &self.values[s * p..(s + 1) * p]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        let p = self.n_params();
        self.values.iter().skip(j).step_by(p).copied().collect()
    }

    pub fn param_index(&self, name: &str) -> Result<usize> {
        self.names.iter().position(|n| n == name).ok_or_else(|| {
            Error::Parameter(format!(
                "unknown parameter `{name}`; available: {}",
                self.names.join(", ")
            ))
        })
    }

    pub fn column_by_name(&self, name: &str) -> Result<Vec<f64>> {
        Ok(self.column(self.param_index(name)?))
    }

    /// Draws of parameter `j` split by chain, in order of first appearance.
    pub fn chain_columns(&self, j: usize) -> Vec<Vec<f64>> {
        let p = self.n_params();
        let mut out: Vec<Vec<f64>> = Vec::new();
        let mut last = None;
        for (s, &c) in self.chain_ids.iter().enumerate() {
            if last != Some(c) {
                out.push(Vec::new());
                last = Some(c);
            }
            out.last_mut().unwrap().push(self.values[s * p + j]);
        }
        out
    }

    pub fn diagnostics_for(&self, name: &str) -> Result<ParamDiagnostics> {
        Ok(self.diagnostics[self.param_index(name)?])
    }

    /// Largest R-hat over the named parameters. Undefined values count as
    /// failures and yield `None`.
    pub fn max_rhat(&self, names: &[&str]) -> Result<Option<f64>> {
        let mut max = 1.0f64;
        for n in names {
            match self.diagnostics_for(n)?.rhat {
                Some(r) => max = max.max(r),
                None => return Ok(None),
            }
        }
        Ok(Some(max))
    }
}
