//! Bayesian inference for a crossed-random-effects lognormal linear mixed model.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only pure computation:
//! the model's log density and exact gradient, a dynamic-trajectory HMC sampler
//! with warmup adaptation, convergence diagnostics, posterior summaries, Bayes
//! factors and predictive model comparison. File formats, the command line and
//! multi-threaded orchestration live in the `bayes-lmm` crate.
//!
//! The model for the log reading time of observation `n` (subject `s`, item `j`,
//! sum-coded condition `c = ±1`) is
//!
//! ```text
//! log_rt[n] ~ Normal(b0 + u0[s] + w0[j] + (b1 + u1[s] + w1[j]) * c, sigma)
//! ```
//!
//! where the subject effects `(u0, u1)` and item effects `(w0, w1)` are
//! bivariate normal with their own standard deviations and correlation.
#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod analysis;
pub mod compare;
pub mod data;
pub mod density;
pub mod draws;
pub mod error;
pub mod evidence;
pub mod math;
pub mod model;
pub mod sampler;

pub use data::{CodedDataset, LevelMap, Observation, TrialRecord};
pub use draws::PosteriorDraws;
pub use error::{Error, Result};
pub use model::{ConstrainedParams, FixedEffects, LmmPosterior, ModelSpec, NormalPrior, PriorSpec};
pub use sampler::{SamplerConfig, Target};
