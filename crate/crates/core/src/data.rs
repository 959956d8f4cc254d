//! Repeated-measures reading-time data: validation, region filtering, sum
//! coding and dense subject/item indexing.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::model::PopulationParams;

/// One raw row as read from a data file, before validation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTrial {
    /// 1-based line number in the source file, used in error messages.
    pub row: usize,
    pub subj: String,
    pub item: String,
    pub region: String,
    pub condition_label: String,
    /// Unparsed reaction time; empty or `NA` means missing.
    pub rt: String,
}

/// A validated observation with its original labels.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub subj: String,
    pub item: String,
    pub region: String,
    pub condition_label: String,
    /// Milliseconds, strictly positive.
    pub rt: f64,
}

/// The two condition labels and their sum coding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelMap {
    /// Label coded as `+1`.
    pub positive: String,
    /// Label coded as `-1`.
    pub negative: String,
}

impl LevelMap {
    pub fn new(positive: impl Into<String>, negative: impl Into<String>) -> Result<Self> {
        let (positive, negative) = (positive.into(), negative.into());
        if positive == negative {
            return Err(Error::Parameter(format!(
                "condition levels must be distinct, both are `{positive}`"
            )));
        }
        Ok(Self { positive, negative })
    }

    pub fn code(&self, label: &str) -> Option<f64> {
        if label == self.positive {
            Some(1.0)
        } else if label == self.negative {
            Some(-1.0)
        } else {
            None
        }
    }

    pub fn label(&self, cond: f64) -> &str {
        if cond > 0.0 {
            &self.positive
        } else {
            &self.negative
        }
    }
}

impl Default for LevelMap {
    fn default() -> Self {
        Self {
            positive: "obj-ext".into(),
            negative: "subj-ext".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub subj: usize,
    pub item: usize,
    /// `+1` or `-1`.
    pub cond: f64,
    /// Natural log of `rt`.
    pub log_rt: f64,
    pub rt: f64,
}

/// Row counts produced while loading.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub rows_read: usize,
    pub rows_kept: usize,
    pub rows_dropped_missing: usize,
    pub rows_dropped_region: usize,
    pub n_subj: usize,
    pub n_item: usize,
}

/// Indexed, sum-coded design. Subject and item indices are dense and assigned
/// in order of first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct CodedDataset {
    pub records: Vec<Observation>,
    pub subj_labels: Vec<String>,
    pub item_labels: Vec<String>,
    pub levels: LevelMap,
    pub region: String,
}

#[derive(Default)]
struct Indexer {
    labels: Vec<String>,
    lookup: BTreeMap<String, usize>,
}

impl Indexer {
    fn index(&mut self, label: &str) -> usize {
        if let Some(&i) = self.lookup.get(label) {
            return i;
        }
        let i = self.labels.len();
        self.labels.push(label.to_string());
        self.lookup.insert(label.to_string(), i);
        i
    }
}

fn is_missing(rt: &str) -> bool {
    let rt = rt.trim();
    rt.is_empty() || rt.eq_ignore_ascii_case("na") || rt.eq_ignore_ascii_case("nan")
}

impl CodedDataset {
    /// Filter raw rows to `region`, sum-code the condition and log-transform
    /// the reaction times.
    ///
    /// Rows outside the region and rows with a missing `rt` are dropped and
    /// counted; anything else that fails validation is an error naming the row.
    pub fn from_raw<I>(rows: I, region: &str, levels: &LevelMap) -> Result<(Self, LoadReport)>
    where
        I: IntoIterator<Item = RawTrial>,
    {
        let mut report = LoadReport::default();
        let mut subjects = Indexer::default();
        let mut items = Indexer::default();
        let mut records = Vec::new();
        for raw in rows {
            report.rows_read += 1;
            if raw.region != region {
                report.rows_dropped_region += 1;
                continue;
            }
            if is_missing(&raw.rt) {
                report.rows_dropped_missing += 1;
                continue;
            }
            let rt: f64 = raw.rt.trim().parse().map_err(|_| Error::Data {
                row: raw.row,
                message: format!("rt `{}` is not a number", raw.rt),
            })?;
            if !(rt > 0.0) || !rt.is_finite() {
                return Err(Error::Data {
                    row: raw.row,
                    message: format!("rt must be positive and finite, got {rt}"),
                });
            }
            let cond = levels
                .code(&raw.condition_label)
                .ok_or_else(|| Error::Data {
                    row: raw.row,
                    message: format!(
                        "condition `{}` is neither `{}` nor `{}`",
                        raw.condition_label, levels.positive, levels.negative
                    ),
                })?;
            records.push(Observation {
                subj: subjects.index(&raw.subj),
                item: items.index(&raw.item),
                cond,
                log_rt: math::log(rt),
                rt,
            });
        }
        report.rows_kept = records.len();
        report.n_subj = subjects.labels.len();
        report.n_item = items.labels.len();
        let data = Self {
            records,
            subj_labels: subjects.labels,
            item_labels: items.labels,
            levels: levels.clone(),
            region: region.to_string(),
        };
        Ok((data, report))
    }

    pub fn n_obs(&self) -> usize {
        self.records.len()
    }

    pub fn n_subj(&self) -> usize {
        self.subj_labels.len()
    }

    pub fn n_item(&self) -> usize {
        self.item_labels.len()
    }

    /// The observations at `indices`, keeping the full subject and item index
    /// space so parameter vectors stay compatible with the parent dataset.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            records: indices.iter().map(|&i| self.records[i]).collect(),
            subj_labels: self.subj_labels.clone(),
            item_labels: self.item_labels.clone(),
            levels: self.levels.clone(),
            region: self.region.clone(),
        }
    }

    /// Same data with every condition code negated.
    pub fn with_flipped_coding(&self) -> Self {
        let mut out = self.clone();
        for r in &mut out.records {
            r.cond = -r.cond;
        }
        core::mem::swap(&mut out.levels.positive, &mut out.levels.negative);
        out
    }

    pub fn mean_rt(&self) -> f64 {
        math::mean(&self.records.iter().map(|r| r.rt).collect::<Vec<_>>())
    }

    /// Back to labelled records, in dataset order.
    pub fn trial_records(&self) -> Vec<TrialRecord> {
        self.records
            .iter()
            .map(|r| TrialRecord {
                subj: self.subj_labels[r.subj].clone(),
                item: self.item_labels[r.item].clone(),
                region: self.region.clone(),
                condition_label: self.levels.label(r.cond).to_string(),
                rt: r.rt,
            })
            .collect()
    }
}

/// Draw a fully crossed dataset (every subject sees every item once) from the
/// generative model. Conditions follow a Latin-square rotation: subject `s`
/// sees item `j` in the positive condition when `s + j` is even.
///
/// Zero standard deviations are allowed here so noiseless designs can be built.
pub fn simulate_dataset(
    truth: &PopulationParams,
    n_subj: usize,
    n_item: usize,
    seed: u64,
) -> Result<CodedDataset> {
    if n_subj < 2 || n_item < 2 {
        return Err(Error::Parameter(format!(
            "simulation needs at least 2 subjects and 2 items, got {n_subj} and {n_item}"
        )));
    }
    truth.validate_for_simulation()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };

    let subj_effects: Vec<[f64; 2]> = (0..n_subj)
        .map(|_| truth.subj.effects([draw(), draw()]))
        .collect();
    let item_effects: Vec<[f64; 2]> = (0..n_item)
        .map(|_| truth.item.effects([draw(), draw()]))
        .collect();

    let mut records = Vec::with_capacity(n_subj * n_item);
    for (s, u) in subj_effects.iter().enumerate() {
        for (j, w) in item_effects.iter().enumerate() {
            let cond = if (s + j) % 2 == 0 { 1.0 } else { -1.0 };
            let mu = truth.beta0 + u[0] + w[0] + (truth.beta1 + u[1] + w[1]) * cond;
            let log_rt = mu + truth.sigma * draw();
            records.push(Observation {
                subj: s,
                item: j,
                cond,
                log_rt,
                rt: math::exp(log_rt),
            });
        }
    }
    Ok(CodedDataset {
        records,
        subj_labels: (1..=n_subj).map(|i| format!("{i}")).collect(),
        item_labels: (1..=n_item).map(|i| format!("{i}")).collect(),
        levels: LevelMap::default(),
        region: "headnoun".into(),
    })
}
