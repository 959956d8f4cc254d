//! Fit summaries and diagnostics reports built from posterior draws alone,
//! so a summary recomputed from a saved draws file matches the one written
//! at fit time.

use bayes_lmm_core::analysis::{summarize, IntervalKind, SummaryReport, SummaryRequest};
use bayes_lmm_core::draws::ChainStats;
use bayes_lmm_core::math;
use bayes_lmm_core::{PosteriorDraws, Result};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::run::{max_fixed_rhat, FIXED_EFFECTS};

/// R-hat threshold of the convergence gate.
pub const RHAT_LIMIT: f64 = 1.01;

/// One line of the coefficient table: posterior median and MAD-based SD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefRow {
    pub group: String,
    pub term: String,
    pub param: String,
    pub median: f64,
    pub mad_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub coefficients: Vec<CoefRow>,
    pub report: SummaryReport,
}

/// Non-latent parameter names: everything except the standardized
/// per-subject and per-item effects.
pub fn hyper_names(draws: &PosteriorDraws) -> Vec<String> {
    draws
        .names
        .iter()
        .filter(|n| !n.starts_with("z_"))
        .cloned()
        .collect()
}

const TABLE: [(&str, &str, &str); 9] = [
    ("fixed", "intercept", "intercept"),
    ("fixed", "cond", "cond"),
    ("subj", "sd(intercept)", "subj_sd_intercept"),
    ("subj", "sd(cond)", "subj_sd_cond"),
    ("subj", "corr(intercept, cond)", "subj_corr"),
    ("item", "sd(intercept)", "item_sd_intercept"),
    ("item", "sd(cond)", "item_sd_cond"),
    ("item", "corr(intercept, cond)", "item_corr"),
    ("residual", "sd", "sigma"),
];

pub fn fit_summary(draws: &PosteriorDraws, request: &SummaryRequest) -> Result<FitSummary> {
    let mut request = request.clone();
    if request.params.is_empty() {
        request.params = hyper_names(draws);
    }
    request.focus.retain(|f| draws.param_index(f).is_ok());
    let report = summarize(draws, &request)?;
    let mut coefficients = Vec::new();
    for (group, term, param) in TABLE.iter() {
        if draws.param_index(param).is_err() {
            continue;
        }
        let col = draws.column_by_name(param)?;
        coefficients.push(CoefRow {
            group: group.to_string(),
            term: term.to_string(),
            param: param.to_string(),
            median: math::median_sorted(&math::sorted(&col)),
            mad_sd: math::mad_sd(&col),
        });
    }
    Ok(FitSummary {
        coefficients,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub passed: bool,
    pub max_fixed_rhat: Option<f64>,
    pub divergences: usize,
    pub messages: Vec<String>,
}

/// Passes when every fixed effect has R-hat below the limit and there were
/// no post-warmup divergences.
pub fn convergence_gate(draws: &PosteriorDraws) -> Gate {
    let max_rhat = max_fixed_rhat(draws);
    let mut messages = Vec::new();
    match max_rhat {
        Some(r) if r < RHAT_LIMIT => {}
        Some(r) => messages.push(format!(
            "max R-hat over fixed effects is {r:.4} (limit {RHAT_LIMIT})"
        )),
        None => messages.push(format!("R-hat undefined for {}", FIXED_EFFECTS.join(", "))),
    }
    if draws.divergence_count > 0 {
        messages.push(format!(
            "{} divergent transitions after warmup",
            draws.divergence_count
        ));
    }
    Gate {
        passed: messages.is_empty(),
        max_fixed_rhat: max_rhat,
        divergences: draws.divergence_count,
        messages,
    }
}

/// `{param: {rhat, ess}, ..., divergences, seconds_elapsed, gate, chains}`.
/// Undefined diagnostics are written as null.
pub fn diagnostics_json(draws: &PosteriorDraws, seconds_elapsed: f64, gate: &Gate) -> Value {
    let mut map = Map::new();
    for (name, d) in draws.names.iter().zip(&draws.diagnostics) {
        map.insert(name.clone(), json!({ "rhat": d.rhat, "ess": d.ess }));
    }
    map.insert("divergences".into(), json!(draws.divergence_count));
    map.insert("seconds_elapsed".into(), json!(seconds_elapsed));
    map.insert(
        "gate".into(),
        serde_json::to_value(gate).unwrap_or(Value::Null),
    );
    map.insert(
        "chains".into(),
        serde_json::to_value::<&[ChainStats]>(&draws.chain_stats).unwrap_or(Value::Null),
    );
    Value::Object(map)
}

fn fmt_opt(x: Option<f64>, prec: usize) -> String {
    x.map(|v| format!("{v:.prec$}"))
        .unwrap_or_else(|| "-".into())
}

/// Plain-text rendering for the terminal.
pub fn render_summary(s: &FitSummary) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<9} {:<22} {:>9} {:>9}\n",
        "group", "term", "median", "mad_sd"
    ));
    for c in &s.coefficients {
        out.push_str(&format!(
            "{:<9} {:<22} {:>9.4} {:>9.4}\n",
            c.group, c.term, c.median, c.mad_sd
        ));
    }
    out.push('\n');
    out.push_str(&format!(
        "{:<18} {:>9} {:>9} {:>9} {:>9} {:>7} {:>7}\n",
        "param", "mean", "median", "mad_sd", "map", "rhat", "ess"
    ));
    for p in &s.report.params {
        out.push_str(&format!(
            "{:<18} {:>9.4} {:>9.4} {:>9.4} {:>9.4} {:>7} {:>7}\n",
            p.name,
            p.mean,
            p.median,
            p.mad_sd,
            p.map,
            fmt_opt(p.rhat, 3),
            fmt_opt(p.ess, 0)
        ));
    }
    if !s.report.intervals.is_empty() {
        out.push('\n');
    }
    for i in &s.report.intervals {
        let kind = match i.kind {
            IntervalKind::Percentile => "percentile",
            IntervalKind::Hpdi => "HPDI",
        };
        out.push_str(&format!(
            "{} {:.0}% {kind} interval: [{:.4}, {:.4}]\n",
            i.param,
            i.mass * 100.0,
            i.lower,
            i.upper
        ));
    }
    for t in &s.report.tails {
        let op = match t.direction {
            bayes_lmm_core::analysis::Direction::Below => "<",
            bayes_lmm_core::analysis::Direction::Above => ">",
        };
        out.push_str(&format!(
            "P({} {op} {}) = {:.4}\n",
            t.param, t.threshold, t.probability
        ));
    }
    for r in &s.report.rope {
        out.push_str(&format!(
            "{} ROPE [{}, {}] ({:.0}% interval): {}\n",
            r.param,
            r.rope.lower,
            r.rope.upper,
            r.mass * 100.0,
            r.decision
        ));
    }
    out
}
