//! Posterior summaries: point estimates, tail probabilities, credible
//! intervals, ROPE decisions and prior-sensitivity rows.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::density::Kde;
use crate::draws::PosteriorDraws;
use crate::error::{Error, Result};
use crate::math::{self, ceil, exp, fabs, median_sorted, quantile_sorted};
use crate::model::NormalPrior;

/// Minimum number of draws accepted by the summary functions.
pub const MIN_SAMPLES: usize = 10;

fn check_samples(samples: &[f64]) -> Result<()> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            required: MIN_SAMPLES,
            found: samples.len(),
        });
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

fn check_mass(mass: f64) -> Result<()> {
    if mass > 0.0 && mass < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidMass(mass))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointEstimates {
    pub mean: f64,
    pub median: f64,
    /// Mode of a kernel density estimate; equals the median when the draws
    /// have no spread.
    pub map: f64,
}

pub fn point_estimates(samples: &[f64]) -> Result<PointEstimates> {
    check_samples(samples)?;
    let sorted = math::sorted(samples);
    let median = median_sorted(&sorted);
    let map = match Kde::new(samples) {
        Ok(kde) => kde.mode(),
        Err(_) => median,
    };
    Ok(PointEstimates {
        mean: math::mean(samples),
        median,
        map,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Below,
    Above,
}

/// Fraction of draws strictly below or strictly above `threshold`.
pub fn tail_probability(samples: &[f64], threshold: f64, direction: Direction) -> Result<f64> {
    check_samples(samples)?;
    let count = match direction {
        Direction::Below => samples.iter().filter(|&&x| x < threshold).count(),
        Direction::Above => samples.iter().filter(|&&x| x > threshold).count(),
    };
    Ok(count as f64 / samples.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalKind {
    Percentile,
    Hpdi,
}

/// Equal-tailed interval from the quantiles at `(1 - mass) / 2` and
/// `(1 + mass) / 2`, interpolating linearly between order statistics.
pub fn percentile_interval(samples: &[f64], mass: f64) -> Result<Interval> {
    check_mass(mass)?;
    check_samples(samples)?;
    let sorted = math::sorted(samples);
    let tail = 0.5 * (1.0 - mass);
    Ok(Interval {
        lower: quantile_sorted(&sorted, tail),
        upper: quantile_sorted(&sorted, 1.0 - tail),
    })
}

/// Number of sorted draws spanned by an HPD window of the given mass.
pub fn hpdi_window(n: usize, mass: f64) -> usize {
    (ceil(mass * n as f64 - 1e-9) as usize).clamp(1, n)
}

/// Narrowest window of `ceil(mass * S)` consecutive sorted draws. Ties go to
/// the leftmost window.
pub fn hpdi(samples: &[f64], mass: f64) -> Result<Interval> {
    check_mass(mass)?;
    check_samples(samples)?;
    let sorted = math::sorted(samples);
    let w = hpdi_window(sorted.len(), mass);
    let mut best = 0;
    let mut best_width = f64::INFINITY;
    for i in 0..=sorted.len() - w {
        let width = sorted[i + w - 1] - sorted[i];
        if width < best_width {
            best_width = width;
            best = i;
        }
    }
    Ok(Interval {
        lower: sorted[best],
        upper: sorted[best + w - 1],
    })
}

pub fn interval(samples: &[f64], kind: IntervalKind, mass: f64) -> Result<Interval> {
    match kind {
        IntervalKind::Percentile => percentile_interval(samples, mass),
        IntervalKind::Hpdi => hpdi(samples, mass),
    }
}

/// Region of practical equivalence around the null value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RopeSpec {
    pub lower: f64,
    pub upper: f64,
}

impl RopeSpec {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        let r = Self { lower, upper };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower < self.upper && self.lower.is_finite() && self.upper.is_finite() {
            Ok(())
        } else {
            Err(Error::Parameter(format!(
                "ROPE needs lower < upper, got ({}, {})",
                self.lower, self.upper
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RopeDecision {
    RejectNull,
    AcceptNull,
    Undecided,
}

impl core::fmt::Display for RopeDecision {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(match self {
            RopeDecision::RejectNull => "reject_null",
            RopeDecision::AcceptNull => "accept_null",
            RopeDecision::Undecided => "undecided",
        })
    }
}

pub fn rope_decision(interval: Interval, rope: RopeSpec) -> RopeDecision {
    if interval.upper < rope.lower || interval.lower > rope.upper {
        RopeDecision::RejectNull
    } else if interval.lower >= rope.lower && interval.upper <= rope.upper {
        RopeDecision::AcceptNull
    } else {
        RopeDecision::Undecided
    }
}

/// Difference in milliseconds between the two conditions implied by a
/// log-scale slope under ±1 coding, at the given grand mean.
pub fn effect_to_ms(beta1: f64, grand_mean_ms: f64) -> Result<f64> {
    if !(grand_mean_ms > 0.0 && grand_mean_ms.is_finite()) {
        return Err(Error::Parameter(format!(
            "grand mean must be positive, got {grand_mean_ms}"
        )));
    }
    let b = fabs(beta1);
    let diff = grand_mean_ms * (exp(b) - exp(-b));
    Ok(if beta1 < 0.0 { -diff } else { diff })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub name: String,
    pub mean: f64,
    pub median: f64,
    pub mad_sd: f64,
    pub map: f64,
    pub rhat: Option<f64>,
    pub ess: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalResult {
    pub param: String,
    pub kind: IntervalKind,
    pub mass: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailResult {
    pub param: String,
    pub threshold: f64,
    pub direction: Direction,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RopeResult {
    pub param: String,
    pub kind: IntervalKind,
    pub mass: f64,
    pub rope: RopeSpec,
    pub decision: RopeDecision,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SummaryReport {
    pub params: Vec<ParamSummary>,
    pub intervals: Vec<IntervalResult>,
    pub tails: Vec<TailResult>,
    pub rope: Vec<RopeResult>,
}

impl SummaryReport {
    pub fn param(&self, name: &str) -> Option<&ParamSummary> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn interval(&self, param: &str, kind: IntervalKind, mass: f64) -> Option<&IntervalResult> {
        self.intervals
            .iter()
            .find(|i| i.param == param && i.kind == kind && i.mass == mass)
    }

    pub fn tail(&self, param: &str, threshold: f64, direction: Direction) -> Option<&TailResult> {
        self.tails
            .iter()
            .find(|t| t.param == param && t.threshold == threshold && t.direction == direction)
    }
}

/// What to put in a [`SummaryReport`]. Parameters default to every column
/// of the draws when `params` is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SummaryRequest {
    pub params: Vec<String>,
    /// Parameter the intervals, tails and ROPE decision are computed for.
    pub focus: Vec<String>,
    pub masses: Vec<f64>,
    pub kinds: Vec<IntervalKind>,
    pub thresholds: Vec<(f64, Direction)>,
    pub rope: Option<RopeSpec>,
    /// Interval used for the ROPE decision.
    pub rope_interval: (IntervalKind, f64),
}

impl Default for SummaryRequest {
    fn default() -> Self {
        Self {
            params: Vec::new(),
            focus: alloc::vec!["cond".into()],
            masses: alloc::vec![0.95],
            kinds: alloc::vec![IntervalKind::Percentile, IntervalKind::Hpdi],
            thresholds: alloc::vec![(0.0, Direction::Below)],
            rope: None,
            rope_interval: (IntervalKind::Hpdi, 0.95),
        }
    }
}

pub fn summarize(draws: &PosteriorDraws, request: &SummaryRequest) -> Result<SummaryReport> {
    let names: Vec<String> = if request.params.is_empty() {
        draws.names.clone()
    } else {
        request.params.clone()
    };
    let mut report = SummaryReport::default();
    for name in &names {
        let j = draws.param_index(name)?;
        let col = draws.column(j);
        let pe = point_estimates(&col)?;
        report.params.push(ParamSummary {
            name: name.clone(),
            mean: pe.mean,
            median: pe.median,
            mad_sd: math::mad_sd(&col),
            map: pe.map,
            rhat: draws.diagnostics[j].rhat,
            ess: draws.diagnostics[j].ess,
        });
    }
    for name in &request.focus {
        let col = draws.column_by_name(name)?;
        for &mass in &request.masses {
            for &kind in &request.kinds {
                let iv = interval(&col, kind, mass)?;
                report.intervals.push(IntervalResult {
                    param: name.clone(),
                    kind,
                    mass,
                    lower: iv.lower,
                    upper: iv.upper,
                });
            }
        }
        for &(threshold, direction) in &request.thresholds {
            report.tails.push(TailResult {
                param: name.clone(),
                threshold,
                direction,
                probability: tail_probability(&col, threshold, direction)?,
            });
        }
        if let Some(rope) = request.rope {
            rope.validate()?;
            let (kind, mass) = request.rope_interval;
            let iv = interval(&col, kind, mass)?;
            report.rope.push(RopeResult {
                param: name.clone(),
                kind,
                mass,
                rope,
                decision: rope_decision(iv, rope),
            });
        }
    }
    Ok(report)
}

/// One row of a prior-sensitivity table. On a failed refit only `prior` and
/// `error` are meaningful.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub prior: NormalPrior,
    pub lower: f64,
    pub upper: f64,
    pub prob_negative: f64,
    pub estimate: f64,
    pub max_rhat: Option<f64>,
    pub error: Option<String>,
}

impl SensitivityRow {
    /// Row from slope draws: 95% percentile interval, `P(slope < 0)` and the
    /// posterior mean.
    pub fn from_samples(prior: NormalPrior, slope: &[f64], max_rhat: Option<f64>) -> Result<Self> {
        let iv = percentile_interval(slope, 0.95)?;
        Ok(Self {
            prior,
            lower: iv.lower,
            upper: iv.upper,
            prob_negative: tail_probability(slope, 0.0, Direction::Below)?,
            estimate: math::mean(slope),
            max_rhat,
            error: None,
        })
    }

    pub fn failed(prior: NormalPrior, error: String) -> Self {
        Self {
            prior,
            lower: f64::NAN,
            upper: f64::NAN,
            prob_negative: f64::NAN,
            estimate: f64::NAN,
            max_rhat: None,
            error: Some(error),
        }
    }
}

/// Slope priors of the standard sensitivity table: three weakly informative
/// and three tightly constrained.
pub fn standard_slope_priors() -> Vec<NormalPrior> {
    [
        (0.0, 1.0),
        (0.0, 0.21),
        (0.0, 0.11),
        (-0.18, 0.02),
        (0.05, 0.02),
        (-0.05, 0.02),
    ]
    .iter()
    .map(|&(mean, sd)| NormalPrior { mean, sd })
    .collect()
}
