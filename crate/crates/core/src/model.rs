//! The hierarchical lognormal mixed model: priors, parameter transforms, log
//! likelihood and the joint log density with its analytic gradient.
//!
//! Random effects use the non-centered form. For a grouping factor with
//! standard deviations `tau = (tau0, tau1)` and correlation `rho`, group `j`
//! carries standardized draws `z[j] ~ N(0, I)` and its effects are
//! `diag(tau) * L * z[j]` with `L = [[1, 0], [rho, sqrt(1 - rho^2)]]`.
//!
//! Unconstrained layout (the slope slot is absent in the intercept-only model):
//!
//! | index            | content                                  |
//! |------------------|------------------------------------------|
//! | 0                | intercept                                |
//! | 1                | slope (`cond`)                           |
//! | +0               | `log sigma`                              |
//! | +1, +2, +3       | subject `log tau0`, `log tau1`, `atanh rho` |
//! | +4, +5, +6       | item `log tau0`, `log tau1`, `atanh rho` |
//! | …                | subject `z` rows, then item `z` rows     |

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::compare::LogLikMatrix;
use crate::data::CodedDataset;
use crate::draws::PosteriorDraws;
use crate::error::{Error, Result};
use crate::math::{self, exp, log, normal_lpdf, sqrt, tanh};
use crate::sampler::Target;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalPrior {
    pub mean: f64,
    pub sd: f64,
}

impl NormalPrior {
    pub const fn new(mean: f64, sd: f64) -> Self {
        Self { mean, sd }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sd > 0.0 && self.sd.is_finite() && self.mean.is_finite()) {
            return Err(Error::Parameter(format!(
                "normal prior needs finite mean and positive sd, got Normal({}, {})",
                self.mean, self.sd
            )));
        }
        Ok(())
    }

    pub fn lpdf(&self, x: f64) -> f64 {
        normal_lpdf(x, self.mean, self.sd)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        math::normal_pdf(x, self.mean, self.sd)
    }
}

impl core::fmt::Display for NormalPrior {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "Normal({}, {})", self.mean, self.sd)
    }
}

/// Prior hyperparameters for every parameter block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PriorSpec {
    pub intercept: NormalPrior,
    pub slope: NormalPrior,
    /// Shape of the LKJ prior on each 2x2 correlation matrix; `1` is uniform.
    pub lkj_eta: f64,
    /// Half-normal scale for every random-effect standard deviation.
    pub re_sd_scale: f64,
    /// Half-normal scale for the residual standard deviation.
    pub resid_sd_scale: f64,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self {
            intercept: NormalPrior::new(0.0, 10.0),
            slope: NormalPrior::new(0.0, 1.0),
            lkj_eta: 2.0,
            re_sd_scale: 1.0,
            resid_sd_scale: 2.0,
        }
    }
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        self.intercept.validate()?;
        self.slope.validate()?;
        if !(self.lkj_eta >= 1.0 && self.lkj_eta.is_finite()) {
            return Err(Error::Parameter(format!(
                "lkj_eta must be >= 1, got {}",
                self.lkj_eta
            )));
        }
        for (name, s) in [
            ("re_sd_scale", self.re_sd_scale),
            ("resid_sd_scale", self.resid_sd_scale),
        ] {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Parameter(format!(
                    "{name} must be positive, got {s}"
                )));
            }
        }
        Ok(())
    }

    pub fn with_slope(mut self, slope: NormalPrior) -> Self {
        self.slope = slope;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixedEffects {
    /// `log(rt) ~ 1 + cond`
    InterceptAndSlope,
    /// `log(rt) ~ 1`; the null model, random structure unchanged.
    InterceptOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub fixed: FixedEffects,
    pub prior: PriorSpec,
}

impl ModelSpec {
    pub fn full(prior: PriorSpec) -> Self {
        Self {
            fixed: FixedEffects::InterceptAndSlope,
            prior,
        }
    }

    pub fn null(prior: PriorSpec) -> Self {
        Self {
            fixed: FixedEffects::InterceptOnly,
            prior,
        }
    }
}

/// Position of every parameter block in the flat vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub n_subj: usize,
    pub n_item: usize,
    pub has_slope: bool,
}

impl Layout {
    pub fn new(n_subj: usize, n_item: usize, fixed: FixedEffects) -> Self {
        Self {
            n_subj,
            n_item,
            has_slope: fixed == FixedEffects::InterceptAndSlope,
        }
    }

    pub fn for_data(data: &CodedDataset, fixed: FixedEffects) -> Self {
        Self::new(data.n_subj(), data.n_item(), fixed)
    }

    fn shift(&self) -> usize {
        usize::from(self.has_slope)
    }

    pub fn beta1(&self) -> Option<usize> {
        self.has_slope.then_some(1)
    }

    pub fn sigma(&self) -> usize {
        1 + self.shift()
    }

    /// Offset of `(log tau0, log tau1, atanh rho)` for subjects.
    pub fn subj_hyper(&self) -> usize {
        2 + self.shift()
    }

    pub fn item_hyper(&self) -> usize {
        5 + self.shift()
    }

    pub fn z_subj(&self) -> usize {
        8 + self.shift()
    }

    pub fn z_item(&self) -> usize {
        self.z_subj() + 2 * self.n_subj
    }

    pub fn n_hyper(&self) -> usize {
        8 + self.shift()
    }

    pub fn dim(&self) -> usize {
        self.z_item() + 2 * self.n_item
    }

    /// Names of the constrained-scale parameters, in layout order.
    pub fn names(&self) -> Vec<String> {
        let mut names: Vec<String> = vec!["intercept".into()];
        if self.has_slope {
            names.push("cond".into());
        }
        for n in [
            "sigma",
            "subj_sd_intercept",
            "subj_sd_cond",
            "subj_corr",
            "item_sd_intercept",
            "item_sd_cond",
            "item_corr",
        ] {
            names.push(n.into());
        }
        for (group, n) in [("subj", self.n_subj), ("item", self.n_item)] {
            for j in 0..n {
                names.push(format!("z_{group}.{j}.0"));
                names.push(format!("z_{group}.{j}.1"));
            }
        }
        names
    }

    /// Recover a layout from constrained-scale parameter names.
    pub fn from_names(names: &[String]) -> Result<Self> {
        let has_slope = names.iter().any(|n| n == "cond");
        let count = |prefix: &str| names.iter().filter(|n| n.starts_with(prefix)).count() / 2;
        let layout = Self {
            n_subj: count("z_subj."),
            n_item: count("z_item."),
            has_slope,
        };
        if layout.names() != names {
            return Err(Error::Parameter(
                "parameter names do not describe a mixed-model draw layout".into(),
            ));
        }
        Ok(layout)
    }
}

/// Standard deviations and correlation of one grouping factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupHyper {
    pub tau: [f64; 2],
    pub rho: f64,
}

impl GroupHyper {
    /// Group effects `diag(tau) * L * z`.
    pub fn effects(&self, z: [f64; 2]) -> [f64; 2] {
        let c = sqrt(1.0 - self.rho * self.rho);
        [
            self.tau[0] * z[0],
            self.tau[1] * (self.rho * z[0] + c * z[1]),
        ]
    }

    fn validate(&self, what: &str, allow_zero: bool) -> Result<()> {
        for t in self.tau {
            let ok = if allow_zero { t >= 0.0 } else { t > 0.0 };
            if !ok || !t.is_finite() {
                return Err(Error::Parameter(format!(
                    "{what} standard deviation invalid: {t}"
                )));
            }
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(Error::Parameter(format!(
                "{what} correlation must lie in (-1, 1), got {}",
                self.rho
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupEffects {
    pub hyper: GroupHyper,
    /// Standardized effects, one row per group level.
    pub z: Vec<[f64; 2]>,
}

/// All model parameters on their natural scale.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedParams {
    pub beta0: f64,
    /// `None` in the intercept-only model.
    pub beta1: Option<f64>,
    pub sigma: f64,
    pub subj: GroupEffects,
    pub item: GroupEffects,
}

/// Population-level parameters, used to simulate data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationParams {
    pub beta0: f64,
    pub beta1: f64,
    pub sigma: f64,
    pub subj: GroupHyper,
    pub item: GroupHyper,
}

impl PopulationParams {
    /// Estimates reported for the relative-clause reading-time study, used as a
    /// realistic default for simulation.
    pub fn reading_time_study() -> Self {
        Self {
            beta0: 6.0641,
            beta1: -0.0364,
            sigma: 0.5131,
            subj: GroupHyper {
                tau: [0.2425, 0.0762],
                rho: -0.521,
            },
            item: GroupHyper {
                tau: [0.1829, 0.0475],
                rho: 0.012,
            },
        }
    }

    pub(crate) fn validate_for_simulation(&self) -> Result<()> {
        if !(self.beta0.is_finite() && self.beta1.is_finite()) {
            return Err(Error::Parameter("fixed effects must be finite".into()));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Parameter(format!(
                "sigma must be >= 0, got {}",
                self.sigma
            )));
        }
        self.subj.validate("subject", true)?;
        self.item.validate("item", true)
    }
}

impl ConstrainedParams {
    pub fn layout(&self) -> Layout {
        Layout {
            n_subj: self.subj.z.len(),
            n_item: self.item.z.len(),
            has_slope: self.beta1.is_some(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.beta0.is_finite()
            && self.beta1.is_none_or(f64::is_finite)
            && self
                .subj
                .z
                .iter()
                .chain(&self.item.z)
                .all(|z| z[0].is_finite() && z[1].is_finite());
        if !finite {
            return Err(Error::Parameter("non-finite parameter value".into()));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Parameter(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        self.subj.hyper.validate("subject", false)?;
        self.item.hyper.validate("item", false)
    }

    /// Flatten in layout order (natural scale).
    pub fn to_row(&self) -> Vec<f64> {
        let mut row = Vec::with_capacity(self.layout().dim());
        row.push(self.beta0);
        if let Some(b1) = self.beta1 {
            row.push(b1);
        }
        row.push(self.sigma);
        for g in [&self.subj, &self.item] {
            row.extend_from_slice(&[g.hyper.tau[0], g.hyper.tau[1], g.hyper.rho]);
        }
        for g in [&self.subj, &self.item] {
            for z in &g.z {
                row.extend_from_slice(z);
            }
        }
        row
    }

    pub fn from_row(layout: &Layout, row: &[f64]) -> Result<Self> {
        if row.len() != layout.dim() {
            return Err(Error::Dimension {
                expected: layout.dim(),
                found: row.len(),
            });
        }
        let hyper = |o: usize| GroupHyper {
            tau: [row[o], row[o + 1]],
            rho: row[o + 2],
        };
        let zs = |o: usize, n: usize| {
            (0..n)
                .map(|j| [row[o + 2 * j], row[o + 2 * j + 1]])
                .collect()
        };
        Ok(Self {
            beta0: row[0],
            beta1: layout.beta1().map(|i| row[i]),
            sigma: row[layout.sigma()],
            subj: GroupEffects {
                hyper: hyper(layout.subj_hyper()),
                z: zs(layout.z_subj(), layout.n_subj),
            },
            item: GroupEffects {
                hyper: hyper(layout.item_hyper()),
                z: zs(layout.z_item(), layout.n_item),
            },
        })
    }

    fn check_data(&self, data: &CodedDataset) -> Result<()> {
        if self.subj.z.len() != data.n_subj() {
            return Err(Error::Dimension {
                expected: data.n_subj(),
                found: self.subj.z.len(),
            });
        }
        if self.item.z.len() != data.n_item() {
            return Err(Error::Dimension {
                expected: data.n_item(),
                found: self.item.z.len(),
            });
        }
        Ok(())
    }

    fn linear_predictors(&self) -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
        let u = self
            .subj
            .z
            .iter()
            .map(|&z| self.subj.hyper.effects(z))
            .collect();
        let w = self
            .item
            .z
            .iter()
            .map(|&z| self.item.hyper.effects(z))
            .collect();
        (u, w)
    }
}

/// Map an unconstrained vector to natural-scale parameters, returning the log
/// absolute Jacobian determinant of the transform.
pub fn constrain(layout: &Layout, v: &[f64]) -> Result<(ConstrainedParams, f64)> {
    if v.len() != layout.dim() {
        return Err(Error::Dimension {
            expected: layout.dim(),
            found: v.len(),
        });
    }
    let mut log_jac = v[layout.sigma()];
    let mut group = |o: usize, zo: usize, n: usize| {
        log_jac += v[o] + v[o + 1] + math::log1m_tanh_sq(v[o + 2]);
        GroupEffects {
            hyper: GroupHyper {
                tau: [exp(v[o]), exp(v[o + 1])],
                rho: tanh(v[o + 2]),
            },
            z: (0..n).map(|j| [v[zo + 2 * j], v[zo + 2 * j + 1]]).collect(),
        }
    };
    let subj = group(layout.subj_hyper(), layout.z_subj(), layout.n_subj);
    let item = group(layout.item_hyper(), layout.z_item(), layout.n_item);
    let params = ConstrainedParams {
        beta0: v[0],
        beta1: layout.beta1().map(|i| v[i]),
        sigma: exp(v[layout.sigma()]),
        subj,
        item,
    };
    Ok((params, log_jac))
}

pub fn unconstrain(p: &ConstrainedParams) -> Result<Vec<f64>> {
    p.validate()?;
    let mut v = p.to_row();
    let layout = p.layout();
    v[layout.sigma()] = log(p.sigma);
    for o in [layout.subj_hyper(), layout.item_hyper()] {
        v[o] = log(v[o]);
        v[o + 1] = log(v[o + 1]);
        v[o + 2] = math::atanh(v[o + 2]);
    }
    Ok(v)
}

/// Log density of the LKJ distribution on a 2x2 correlation matrix, as a
/// density on the off-diagonal `rho`: `(rho + 1) / 2 ~ Beta(eta, eta)`.
pub fn lkj_corr2_lpdf(rho: f64, eta: f64) -> f64 {
    (eta - 1.0) * log(1.0 - rho * rho) - (2.0 * eta - 1.0) * math::LN_2 - math::ln_beta(eta, eta)
}

/// Normalized log prior density on the natural scale.
pub fn log_prior(p: &ConstrainedParams, spec: &PriorSpec) -> f64 {
    let mut lp = spec.intercept.lpdf(p.beta0);
    if let Some(b1) = p.beta1 {
        lp += spec.slope.lpdf(b1);
    }
    lp += math::half_normal_lpdf(p.sigma, spec.resid_sd_scale);
    for g in [&p.subj, &p.item] {
        lp += math::half_normal_lpdf(g.hyper.tau[0], spec.re_sd_scale);
        lp += math::half_normal_lpdf(g.hyper.tau[1], spec.re_sd_scale);
        lp += lkj_corr2_lpdf(g.hyper.rho, spec.lkj_eta);
        for z in &g.z {
            lp += normal_lpdf(z[0], 0.0, 1.0) + normal_lpdf(z[1], 0.0, 1.0);
        }
    }
    lp
}

pub fn log_likelihood(p: &ConstrainedParams, data: &CodedDataset) -> Result<f64> {
    p.check_data(data)?;
    let (u, w) = p.linear_predictors();
    let b1 = p.beta1.unwrap_or(0.0);
    Ok(data
        .records
        .iter()
        .map(|r| {
            let mu =
                p.beta0 + u[r.subj][0] + w[r.item][0] + (b1 + u[r.subj][1] + w[r.item][1]) * r.cond;
            normal_lpdf(r.log_rt, mu, p.sigma)
        })
        .sum())
}

/// Joint log density on the unconstrained scale and its gradient.
pub fn log_posterior_grad(
    v: &[f64],
    data: &CodedDataset,
    spec: &ModelSpec,
) -> Result<(f64, Vec<f64>)> {
    let layout = Layout::for_data(data, spec.fixed);
    let mut grad = vec![0.0; layout.dim()];
    let value = eval(&layout, &spec.prior, data, v, &mut grad)?;
    Ok((value, grad))
}

/// Log-likelihood of every observation under every draw.
pub fn pointwise_log_lik(draws: &PosteriorDraws, data: &CodedDataset) -> Result<LogLikMatrix> {
    let layout = Layout::from_names(&draws.names)?;
    if layout.n_subj != data.n_subj() {
        return Err(Error::Dimension {
            expected: layout.n_subj,
            found: data.n_subj(),
        });
    }
    if layout.n_item != data.n_item() {
        return Err(Error::Dimension {
            expected: layout.n_item,
            found: data.n_item(),
        });
    }
    let n = data.n_obs();
    let mut values = Vec::with_capacity(draws.n_draws() * n);
    for s in 0..draws.n_draws() {
        let p = ConstrainedParams::from_row(&layout, draws.row(s))?;
        let (u, w) = p.linear_predictors();
        let b1 = p.beta1.unwrap_or(0.0);
        for r in &data.records {
            let mu =
                p.beta0 + u[r.subj][0] + w[r.item][0] + (b1 + u[r.subj][1] + w[r.item][1]) * r.cond;
            values.push(normal_lpdf(r.log_rt, mu, p.sigma));
        }
    }
    LogLikMatrix::new(draws.n_draws(), n, values)
}

/// Log pointwise predictive density of `heldout` observations, averaging the
/// likelihood over draws fitted without them.
pub fn heldout_log_pred_density(
    draws: &PosteriorDraws,
    data: &CodedDataset,
    heldout: &[usize],
) -> Result<Vec<f64>> {
    let ll = pointwise_log_lik(draws, &data.subset(heldout))?;
    Ok((0..ll.n_obs())
        .map(|i| math::log_mean_exp(&ll.column(i)))
        .collect())
}

fn eval(
    layout: &Layout,
    prior: &PriorSpec,
    data: &CodedDataset,
    v: &[f64],
    grad: &mut [f64],
) -> Result<f64> {
    if v.len() != layout.dim() {
        return Err(Error::Dimension {
            expected: layout.dim(),
            found: v.len(),
        });
    }
    grad.iter_mut().for_each(|g| *g = 0.0);

    let b0 = v[0];
    let b1 = layout.beta1().map_or(0.0, |i| v[i]);
    let log_sigma = v[layout.sigma()];
    let inv_var = exp(-2.0 * log_sigma);

    let groups = [
        Group::new(v, layout.subj_hyper(), layout.z_subj(), layout.n_subj),
        Group::new(v, layout.item_hyper(), layout.z_item(), layout.n_item),
    ];
    let (subj, item) = (&groups[0], &groups[1]);

    // Per-level sums of dlogp/dmu and dlogp/dmu * cond.
    let mut g_subj = vec![[0.0f64; 2]; layout.n_subj];
    let mut g_item = vec![[0.0f64; 2]; layout.n_item];
    let (mut sum_g, mut sum_gc, mut sum_r2) = (0.0, 0.0, 0.0);
    for r in &data.records {
        let u = subj.effects[r.subj];
        let w = item.effects[r.item];
        let mu = b0 + u[0] + w[0] + (b1 + u[1] + w[1]) * r.cond;
        let resid = r.log_rt - mu;
        sum_r2 += resid * resid;
        let g = resid * inv_var;
        let gc = g * r.cond;
        sum_g += g;
        sum_gc += gc;
        g_subj[r.subj][0] += g;
        g_subj[r.subj][1] += gc;
        g_item[r.item][0] += g;
        g_item[r.item][1] += gc;
    }
    let n = data.n_obs() as f64;
    let mut value = -n * (math::LN_SQRT_2PI + log_sigma) - 0.5 * inv_var * sum_r2;

    // Fixed effects.
    value += prior.intercept.lpdf(b0);
    grad[0] = sum_g - (b0 - prior.intercept.mean) / (prior.intercept.sd * prior.intercept.sd);
    if let Some(i) = layout.beta1() {
        value += prior.slope.lpdf(b1);
        grad[i] = sum_gc - (b1 - prior.slope.mean) / (prior.slope.sd * prior.slope.sd);
    }

    // Residual SD: half-normal prior plus log Jacobian.
    let sigma = exp(log_sigma);
    let s2 = prior.resid_sd_scale * prior.resid_sd_scale;
    value += math::half_normal_lpdf(sigma, prior.resid_sd_scale) + log_sigma;
    grad[layout.sigma()] = -n + sum_r2 * inv_var - sigma * sigma / s2 + 1.0;

    let lkj_const =
        -(2.0 * prior.lkj_eta - 1.0) * math::LN_2 - math::ln_beta(prior.lkj_eta, prior.lkj_eta);
    let re2 = prior.re_sd_scale * prior.re_sd_scale;
    for (group, sums) in groups.iter().zip([&g_subj, &g_item]) {
        let o = group.hyper_offset;
        let [t0, t1] = group.tau;
        let (rho, c) = (group.rho, group.c);
        let (mut d_lt0, mut d_lt1, mut d_a) = (0.0, 0.0, 0.0);
        for (j, (gs, e)) in sums.iter().zip(&group.effects).enumerate() {
            let zo = group.z_offset + 2 * j;
            let (z0, z1) = (v[zo], v[zo + 1]);
            d_lt0 += gs[0] * e[0];
            d_lt1 += gs[1] * e[1];
            // d e1 / d atanh(rho) = tau1 * (z0 (1 - rho^2) - rho c z1)
            d_a += gs[1] * t1 * (z0 * c * c - rho * c * z1);
            grad[zo] = gs[0] * t0 + gs[1] * t1 * rho - z0;
            grad[zo + 1] = gs[1] * t1 * c - z1;
            value -= 0.5 * (z0 * z0 + z1 * z1) + 2.0 * math::LN_SQRT_2PI;
        }
        value += math::half_normal_lpdf(t0, prior.re_sd_scale) + v[o];
        value += math::half_normal_lpdf(t1, prior.re_sd_scale) + v[o + 1];
        value += lkj_const + prior.lkj_eta * group.log1m_rho2;
        grad[o] = d_lt0 - t0 * t0 / re2 + 1.0;
        grad[o + 1] = d_lt1 - t1 * t1 / re2 + 1.0;
        grad[o + 2] = d_a - 2.0 * prior.lkj_eta * rho;
    }

    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFinite)
    }
}

struct Group {
    hyper_offset: usize,
    z_offset: usize,
    tau: [f64; 2],
    rho: f64,
    /// `sqrt(1 - rho^2)`
    c: f64,
    log1m_rho2: f64,
    effects: Vec<[f64; 2]>,
}

impl Group {
    fn new(v: &[f64], hyper_offset: usize, z_offset: usize, n: usize) -> Self {
        let o = hyper_offset;
        let tau = [exp(v[o]), exp(v[o + 1])];
        let rho = tanh(v[o + 2]);
        let log1m_rho2 = math::log1m_tanh_sq(v[o + 2]);
        let c = exp(0.5 * log1m_rho2);
        let effects = (0..n)
            .map(|j| {
                let (z0, z1) = (v[z_offset + 2 * j], v[z_offset + 2 * j + 1]);
                [tau[0] * z0, tau[1] * (rho * z0 + c * z1)]
            })
            .collect();
        Self {
            hyper_offset,
            z_offset,
            tau,
            rho,
            c,
            log1m_rho2,
            effects,
        }
    }
}

/// The model bound to a dataset, ready for sampling.
#[derive(Debug, Clone)]
pub struct LmmPosterior<'a> {
    data: &'a CodedDataset,
    spec: ModelSpec,
    layout: Layout,
}

impl<'a> LmmPosterior<'a> {
    pub fn new(data: &'a CodedDataset, spec: ModelSpec) -> Result<Self> {
        if data.n_obs() == 0 {
            return Err(Error::EmptyDataset);
        }
        spec.prior.validate()?;
        Ok(Self {
            data,
            spec,
            layout: Layout::for_data(data, spec.fixed),
        })
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn data(&self) -> &CodedDataset {
        self.data
    }
}

impl Target for LmmPosterior<'_> {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn log_density_grad(&self, position: &[f64], grad: &mut [f64]) -> Result<f64> {
        eval(&self.layout, &self.spec.prior, self.data, position, grad)
    }

    fn param_names(&self) -> Vec<String> {
        self.layout.names()
    }

    fn constrained(&self, position: &[f64], out: &mut Vec<f64>) {
        let start = out.len();
        out.extend_from_slice(position);
        let row = &mut out[start..];
        row[self.layout.sigma()] = exp(row[self.layout.sigma()]);
        for o in [self.layout.subj_hyper(), self.layout.item_hyper()] {
            row[o] = exp(row[o]);
            row[o + 1] = exp(row[o + 1]);
            row[o + 2] = tanh(row[o + 2]);
        }
    }
}
