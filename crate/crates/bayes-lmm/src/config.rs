use std::path::{Path, PathBuf};

use bayes_lmm_core::analysis::{standard_slope_priors, RopeSpec, SummaryRequest};
use bayes_lmm_core::compare::{ElpdMethod, FoldScheme};
use bayes_lmm_core::{LevelMap, NormalPrior, PriorSpec, SamplerConfig};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};
use crate::io::LoadOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ComparisonConfig {
    pub methods: Vec<ElpdMethod>,
    /// Number of folds when `kfold` is among the methods.
    pub k: usize,
    pub scheme: FoldScheme,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        Self {
            methods: vec![ElpdMethod::Waic, ElpdMethod::PsisLoo],
            k: 10,
            scheme: FoldScheme::Random,
        }
    }
}

/// Everything a run needs. Every field has a default, so a config file only
/// lists what it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub region: String,
    pub condition_column: String,
    pub levels: LevelMap,
    pub prior: PriorSpec,
    pub sampler: SamplerConfig,
    pub out: PathBuf,
    pub rope: Option<RopeSpec>,
    /// Slope priors refitted for the Savage–Dickey table.
    pub bf_priors: Vec<NormalPrior>,
    /// Slope priors refitted for the sensitivity table.
    pub sensitivity_priors: Vec<NormalPrior>,
    pub comparison: ComparisonConfig,
    pub summary: SummaryRequest,
}

impl Default for RunConfig {
    fn default() -> Self {
        let summary = SummaryRequest {
            thresholds: vec![
                (0.0, bayes_lmm_core::analysis::Direction::Below),
                (-0.02, bayes_lmm_core::analysis::Direction::Below),
            ],
            ..SummaryRequest::default()
        };
        Self {
            data: None,
            region: "headnoun".into(),
            condition_column: "type".into(),
            levels: LevelMap::default(),
            prior: PriorSpec::default(),
            sampler: SamplerConfig::default(),
            out: PathBuf::from("out"),
            rope: Some(RopeSpec {
                lower: -0.005,
                upper: 0.005,
            }),
            bf_priors: vec![
                NormalPrior { mean: 0.0, sd: 1.0 },
                NormalPrior {
                    mean: 0.0,
                    sd: 0.21,
                },
                NormalPrior {
                    mean: 0.0,
                    sd: 0.11,
                },
            ],
            sensitivity_priors: standard_slope_priors(),
            comparison: ComparisonConfig::default(),
            summary,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| AppError::format(path, e.to_string()))
    }

    pub fn load_options(&self) -> LoadOptions {
        LoadOptions {
            region: self.region.clone(),
            levels: self.levels.clone(),
            condition_column: self.condition_column.clone(),
        }
    }

    pub fn data_path(&self) -> AppResult<&Path> {
        self.data.as_deref().ok_or_else(|| {
            AppError::Usage("no data file given; pass --data or set `data` in the config".into())
        })
    }

    pub fn validate(&self) -> AppResult<()> {
        self.prior.validate()?;
        self.sampler.validate()?;
        if let Some(r) = &self.rope {
            r.validate()?;
        }
        for p in self.bf_priors.iter().chain(&self.sensitivity_priors) {
            p.validate()?;
        }
        Ok(())
    }
}
