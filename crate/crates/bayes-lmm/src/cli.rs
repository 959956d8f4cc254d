use std::ffi::OsString;
use std::path::PathBuf;

use bayes_lmm_core::analysis::IntervalKind;
use bayes_lmm_core::compare::ElpdMethod;
use bayes_lmm_core::NormalPrior;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::commands;
use crate::config::RunConfig;
use crate::error::{AppError, AppResult};

/// Exit code for success.
pub const EXIT_OK: u8 = 0;
/// Exit code for bad input or usage.
pub const EXIT_INPUT: u8 = 1;
/// Exit code when sampling finished but failed the convergence checks.
pub const EXIT_DIAGNOSTIC: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "bayes-lmm",
    version,
    about = "Bayesian linear mixed models for reading-time data"
)]
pub struct Cli {
    /// JSON run configuration; command-line flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Base random seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the model and write draws, diagnostics and a summary.
    Fit(FitArgs),
    /// Summarize a draws file.
    Summarize(SummarizeArgs),
    /// Refit under a list of slope priors.
    Sensitivity(SensitivityArgs),
    /// Bayes factors: coin-toss marginals or Savage–Dickey ratios.
    Evidence(EvidenceArgs),
    /// Compare the model with and without the fixed slope.
    Compare(CompareArgs),
    /// Conjugate beta-binomial grids.
    Demo(DemoArgs),
    /// Simulate a crossed dataset from known parameters.
    Simulate(SimulateArgs),
}

#[derive(Debug, Args, Default)]
pub struct SamplerArgs {
    #[arg(long)]
    pub chains: Option<usize>,
    /// Iterations per chain, warmup included.
    #[arg(long)]
    pub iter: Option<usize>,
    #[arg(long)]
    pub warmup: Option<usize>,
    #[arg(long)]
    pub target_accept: Option<f64>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Data file (overrides `data` in the config).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Fit the intercept-only model.
    #[arg(long)]
    pub null: bool,
    #[command(flatten)]
    pub sampler: SamplerArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Percentile,
    Hpdi,
}

impl From<KindArg> for IntervalKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Percentile => IntervalKind::Percentile,
            KindArg::Hpdi => IntervalKind::Hpdi,
        }
    }
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    /// Draws file (default: `<out>/draws.csv`).
    #[arg(long)]
    pub draws: Option<PathBuf>,
    /// Parameters to compute intervals and tail probabilities for.
    #[arg(long = "param")]
    pub params: Vec<String>,
    /// Thresholds for `P(param < threshold)`.
    #[arg(long = "threshold", allow_negative_numbers = true)]
    pub thresholds: Vec<f64>,
    /// Interval probability masses.
    #[arg(long = "mass")]
    pub masses: Vec<f64>,
    #[arg(long = "kind", value_enum)]
    pub kinds: Vec<KindArg>,
    /// Region of practical equivalence as `lower,upper`.
    #[arg(long, allow_hyphen_values = true)]
    pub rope: Option<String>,
    /// Interval kind used for the ROPE decision.
    #[arg(long, value_enum)]
    pub rope_kind: Option<KindArg>,
    /// Print JSON instead of a table.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct SensitivityArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Slope prior as `mean,sd`; repeat for several.
    #[arg(long = "prior", allow_hyphen_values = true)]
    pub priors: Vec<String>,
    #[command(flatten)]
    pub sampler: SamplerArgs,
}

#[derive(Debug, Args)]
pub struct EvidenceArgs {
    #[command(subcommand)]
    pub mode: EvidenceMode,
}

#[derive(Debug, Subcommand)]
pub enum EvidenceMode {
    /// Exact binomial marginal likelihoods.
    Coin {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        k: u64,
        /// Success probability under M0.
        #[arg(long, default_value_t = 0.5)]
        p0: f64,
        /// Point alternative for M1.
        #[arg(long, conflicts_with = "mixture")]
        p1: Option<f64>,
        /// Discrete prior for M1 as `p:w,p:w,...`.
        #[arg(long)]
        mixture: Option<String>,
    },
    /// Savage–Dickey ratio for `cond = point`.
    SavageDickey {
        /// Use existing draws; `--prior` must be the slope prior they were fitted with.
        #[arg(long, conflicts_with = "data")]
        draws: Option<PathBuf>,
        /// Refit the model on this data once per prior.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Slope prior as `mean,sd`; repeat for several.
        #[arg(long = "prior", allow_hyphen_values = true)]
        priors: Vec<String>,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        point: f64,
        #[command(flatten)]
        sampler: SamplerArgs,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Waic,
    PsisLoo,
    Kfold,
}

impl From<MethodArg> for ElpdMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Waic => ElpdMethod::Waic,
            MethodArg::PsisLoo => ElpdMethod::PsisLoo,
            MethodArg::Kfold => ElpdMethod::Kfold,
        }
    }
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long = "method", value_enum)]
    pub methods: Vec<MethodArg>,
    /// Number of folds for k-fold.
    #[arg(long)]
    pub k: Option<usize>,
    /// Keep each subject's trials in a single fold.
    #[arg(long)]
    pub by_subject: bool,
    #[command(flatten)]
    pub sampler: SamplerArgs,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    /// Beta prior as `a,b`; repeat for several.
    #[arg(long = "prior")]
    pub priors: Vec<String>,
    /// Number of trials; repeat for several.
    #[arg(long = "n")]
    pub ns: Vec<u64>,
    /// Successes are `round(proportion * n)`.
    #[arg(long, default_value_t = 0.4)]
    pub proportion: f64,
    #[arg(long, default_value_t = 201)]
    pub grid: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 37)]
    pub n_subj: usize,
    #[arg(long, default_value_t = 15)]
    pub n_item: usize,
    #[arg(long, allow_negative_numbers = true)]
    pub beta0: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta1: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
}

pub fn parse_normal(s: &str) -> AppResult<NormalPrior> {
    let (m, sd) = parse_pair(s, ',')?;
    let p = NormalPrior { mean: m, sd };
    p.validate()?;
    Ok(p)
}

pub fn parse_pair(s: &str, sep: char) -> AppResult<(f64, f64)> {
    let bad = || {
        AppError::Usage(format!(
            "expected two numbers separated by `{sep}`, got `{s}`"
        ))
    };
    let (a, b) = s.split_once(sep).ok_or_else(bad)?;
    Ok((
        a.trim().parse().map_err(|_| bad())?,
        b.trim().parse().map_err(|_| bad())?,
    ))
}

impl SamplerArgs {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let s = &mut cfg.sampler;
        if let Some(c) = self.chains {
            s.chains = c;
        }
        if let Some(i) = self.iter {
            s.iter = i;
        }
        if let Some(w) = self.warmup {
            s.warmup = w;
        }
        if let Some(a) = self.target_accept {
            s.target_accept = a;
        }
    }
}

/// Resolve the effective configuration from the config file and global flags.
pub fn base_config(cli: &Cli) -> AppResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.sampler.base_seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

/// Parse arguments and run; returns the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let result = crate::run::thread_pool(cli.threads)
        .map_err(|e| AppError::Usage(format!("cannot start thread pool: {e}")))
        .and_then(|pool| pool.install(|| commands::dispatch(&cli)));
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}
