use std::path::PathBuf;
use std::time::Instant;

use bayes_lmm_core::analysis::{Direction, RopeSpec, SummaryRequest};
use bayes_lmm_core::compare::{compare, psis_loo, waic, ElpdMethod, ElpdResult};
use bayes_lmm_core::data::simulate_dataset;
use bayes_lmm_core::evidence::{
    bayes_factor_described, beta_binomial_posterior, binomial_marginal_mixture,
    binomial_marginal_point, savage_dickey_bf, BinomialExperiment, DiscretePrior,
};
use bayes_lmm_core::model::{pointwise_log_lik, PopulationParams};
use bayes_lmm_core::{CodedDataset, ModelSpec, NormalPrior};
use serde_json::json;

use crate::cli::{
    base_config, parse_normal, parse_pair, Cli, Command, CompareArgs, DemoArgs, EvidenceMode,
    FitArgs, SensitivityArgs, SimulateArgs, SummarizeArgs, EXIT_DIAGNOSTIC, EXIT_OK,
};
use crate::config::RunConfig;
use crate::error::{AppError, AppResult};
use crate::io::{
    dataset_tsv, draws_csv, load_dataset, read_draws_csv, records_csv, table_csv, Outputs,
};
use crate::report::{convergence_gate, diagnostics_json, fit_summary, render_summary};
use crate::run;

pub fn dispatch(cli: &Cli) -> AppResult<u8> {
    let mut cfg = base_config(cli)?;
    match &cli.command {
        Command::Fit(a) => fit(&mut cfg, a),
        Command::Summarize(a) => summarize(&cfg, a),
        Command::Sensitivity(a) => sensitivity(&mut cfg, a),
        Command::Evidence(a) => match &a.mode {
            EvidenceMode::Coin {
                n,
                k,
                p0,
                p1,
                mixture,
            } => coin(&cfg, *n, *k, *p0, *p1, mixture.as_deref()),
            EvidenceMode::SavageDickey {
                draws,
                data,
                priors,
                point,
                sampler,
            } => {
                sampler.apply(&mut cfg);
                if let Some(d) = data {
                    cfg.data = Some(d.clone());
                }
                savage_dickey(&cfg, draws.clone(), priors, *point)
            }
        },
        Command::Compare(a) => compare_models(&mut cfg, a),
        Command::Demo(a) => demo(&cfg, a),
        Command::Simulate(a) => simulate(&mut cfg, a),
    }
}

/// Summary request from the config, with the top-level ROPE filled in.
pub fn summary_request(cfg: &RunConfig) -> SummaryRequest {
    let mut req = cfg.summary.clone();
    if req.rope.is_none() {
        req.rope = cfg.rope;
    }
    req
}

fn load(cfg: &RunConfig) -> AppResult<(CodedDataset, bayes_lmm_core::data::LoadReport)> {
    cfg.validate()?;
    load_dataset(cfg.data_path()?, &cfg.load_options())
}

fn exit_code(passed: bool) -> u8 {
    if passed {
        EXIT_OK
    } else {
        EXIT_DIAGNOSTIC
    }
}

fn fit(cfg: &mut RunConfig, args: &FitArgs) -> AppResult<u8> {
    if let Some(d) = &args.data {
        cfg.data = Some(d.clone());
    }
    args.sampler.apply(cfg);
    let (data, load_report) = load(cfg)?;
    let spec = if args.null {
        ModelSpec::null(cfg.prior)
    } else {
        ModelSpec::full(cfg.prior)
    };

    let start = Instant::now();
    let draws = run::fit(&data, spec, &cfg.sampler)?;
    let elapsed = start.elapsed().as_secs_f64();

    let summary = fit_summary(&draws, &summary_request(cfg))?;
    let gate = convergence_gate(&draws);

    let mut out = Outputs::new(&cfg.out);
    out.add("draws.csv", draws_csv(&draws)?);
    out.add_json(
        "diagnostics.json",
        &diagnostics_json(&draws, elapsed, &gate),
    )?;
    out.add_json("summary.json", &summary)?;
    out.add_json("load_report.json", &load_report)?;
    out.add_json("config.json", cfg)?;
    out.write_all()?;

    print!("{}", render_summary(&summary));
    println!(
        "\n{} observations, {} subjects, {} items; {:.1}s",
        data.n_obs(),
        data.n_subj(),
        data.n_item(),
        elapsed
    );
    for m in &gate.messages {
        eprintln!("warning: {m}");
    }
    Ok(exit_code(gate.passed))
}

fn summarize(cfg: &RunConfig, args: &SummarizeArgs) -> AppResult<u8> {
    let path = args
        .draws
        .clone()
        .unwrap_or_else(|| cfg.out.join("draws.csv"));
    let draws = read_draws_csv(&path)?;
    let mut req = summary_request(cfg);
    if !args.params.is_empty() {
        for p in &args.params {
            draws.param_index(p)?;
        }
        req.focus = args.params.clone();
    }
    if !args.thresholds.is_empty() {
        req.thresholds = args
            .thresholds
            .iter()
            .map(|&t| (t, Direction::Below))
            .collect();
    }
    if !args.masses.is_empty() {
        req.masses = args.masses.clone();
    }
    if !args.kinds.is_empty() {
        req.kinds = args.kinds.iter().map(|&k| k.into()).collect();
    }
    if let Some(r) = &args.rope {
        let (lo, hi) = parse_pair(r, ',')?;
        req.rope = Some(RopeSpec::new(lo, hi)?);
    }
    if let Some(k) = args.rope_kind {
        req.rope_interval.0 = k.into();
    }
    let summary = fit_summary(&draws, &req)?;
    if args.json {
        print!(
            "{}",
            String::from_utf8_lossy(&crate::io::json_bytes(&summary)?)
        );
    } else {
        print!("{}", render_summary(&summary));
    }
    Ok(EXIT_OK)
}

fn priors_or(list: &[String], default: &[NormalPrior]) -> AppResult<Vec<NormalPrior>> {
    if list.is_empty() {
        Ok(default.to_vec())
    } else {
        list.iter().map(|s| parse_normal(s)).collect()
    }
}

fn sensitivity(cfg: &mut RunConfig, args: &SensitivityArgs) -> AppResult<u8> {
    if let Some(d) = &args.data {
        cfg.data = Some(d.clone());
    }
    args.sampler.apply(cfg);
    cfg.sensitivity_priors = priors_or(&args.priors, &cfg.sensitivity_priors)?;
    let (data, _) = load(cfg)?;
    let rows = run::sensitivity_sweep(&data, cfg.prior, &cfg.sensitivity_priors, &cfg.sampler);

    let csv_rows = rows.iter().map(|r| {
        vec![
            r.prior.to_string(),
            r.lower.to_string(),
            r.upper.to_string(),
            r.prob_negative.to_string(),
            r.estimate.to_string(),
            r.max_rhat.map(|x| x.to_string()).unwrap_or_default(),
            r.error.clone().unwrap_or_default(),
        ]
    });
    let mut out = Outputs::new(&cfg.out);
    out.add(
        "sensitivity.csv",
        table_csv(
            &[
                "prior",
                "lower",
                "upper",
                "prob_negative",
                "estimate",
                "max_rhat",
                "error",
            ],
            csv_rows,
        )?,
    );
    out.add_json("sensitivity.json", &rows)?;
    out.add_json("sensitivity_config.json", cfg)?;
    out.write_all()?;

    println!(
        "{:<22} {:>16} {:>9} {:>9} {:>7}",
        "prior", "95% CrI", "P(b<0)", "estimate", "rhat"
    );
    let mut ok = true;
    for r in &rows {
        match &r.error {
            Some(e) => {
                ok = false;
                println!("{:<22} failed: {e}", r.prior.to_string());
            }
            None => {
                let rhat_ok = r.max_rhat.is_some_and(|x| x < crate::report::RHAT_LIMIT);
                ok &= rhat_ok;
                println!(
                    "{:<22} [{:>6.3}, {:>6.3}] {:>9.3} {:>9.4} {:>7}",
                    r.prior.to_string(),
                    r.lower,
                    r.upper,
                    r.prob_negative,
                    r.estimate,
                    r.max_rhat
                        .map(|x| format!("{x:.3}"))
                        .unwrap_or_else(|| "-".into())
                );
            }
        }
    }
    Ok(exit_code(ok))
}

fn parse_mixture(s: &str) -> AppResult<DiscretePrior> {
    let mut support = Vec::new();
    let mut weights = Vec::new();
    for atom in s.split(',') {
        let (p, w) = parse_pair(atom, ':')?;
        support.push(p);
        weights.push(w);
    }
    Ok(DiscretePrior::new(support, weights)?)
}

fn coin(
    cfg: &RunConfig,
    n: u64,
    k: u64,
    p0: f64,
    p1: Option<f64>,
    mixture: Option<&str>,
) -> AppResult<u8> {
    let exp = BinomialExperiment::new(n, k)?;
    let m0 = binomial_marginal_point(exp, p0)?;
    let (m1, desc) = match (p1, mixture) {
        (Some(p), None) => (binomial_marginal_point(exp, p)?, format!("p = {p}")),
        (None, Some(m)) => (
            binomial_marginal_mixture(exp, &parse_mixture(m)?)?,
            format!("p ~ {{{m}}}"),
        ),
        _ => {
            return Err(AppError::Usage(
                "coin mode needs exactly one of --p1 or --mixture".into(),
            ))
        }
    };
    let bf = bayes_factor_described(m0, m1, &format!("p = {p0}"), &desc)?;
    let report = json!({
        "n": n, "k": k, "m0": m0, "m1": m1,
        "bf01": bf.bf01, "method": bf.method, "interpretation": bf.interpretation,
        "numerator": bf.numerator, "denominator": bf.denominator,
    });
    let mut out = Outputs::new(&cfg.out);
    out.add_json("evidence.json", &report)?;
    out.write_all()?;
    println!("P(D | {}) = {m0:.5}", bf.numerator);
    println!("P(D | {}) = {m1:.5}", bf.denominator);
    println!("BF01 = {:.4} ({})", bf.bf01, bf.interpretation);
    Ok(EXIT_OK)
}

fn savage_dickey(
    cfg: &RunConfig,
    draws: Option<PathBuf>,
    priors: &[String],
    point: f64,
) -> AppResult<u8> {
    let results: Vec<(NormalPrior, Result<_, String>)> = if let Some(path) = draws {
        let priors = priors_or(priors, &[cfg.prior.slope])?;
        if priors.len() != 1 {
            return Err(AppError::Usage(
                "with --draws give the one slope prior the draws were fitted with".into(),
            ));
        }
        let d = read_draws_csv(&path)?;
        let slope = d.column_by_name("cond")?;
        vec![(
            priors[0],
            savage_dickey_bf(&slope, priors[0], point).map_err(|e| e.to_string()),
        )]
    } else {
        if cfg.data.is_none() {
            return Err(AppError::Usage(
                "savage-dickey needs posterior draws: pass --draws, or --data to refit".into(),
            ));
        }
        let priors = priors_or(priors, &cfg.bf_priors)?;
        let (data, _) = load(cfg)?;
        let res = run::savage_dickey_refits(&data, cfg.prior, &priors, point, &cfg.sampler);
        priors
            .into_iter()
            .zip(res.into_iter().map(|r| r.map_err(|e| e.to_string())))
            .collect()
    };

    let mut rows = Vec::new();
    let mut ok = true;
    for (prior, r) in &results {
        match r {
            Ok(bf) => {
                println!(
                    "{:<22} BF01 = {:>8.3} ({})",
                    prior.to_string(),
                    bf.bf01,
                    bf.interpretation
                );
                rows.push(json!({
                    "bf01": bf.bf01, "method": bf.method, "prior": prior, "point": point,
                    "interpretation": bf.interpretation,
                }));
            }
            Err(e) => {
                ok = false;
                eprintln!("{prior}: {e}");
                rows.push(json!({ "prior": prior, "point": point, "error": e }));
            }
        }
    }
    let mut out = Outputs::new(&cfg.out);
    out.add_json("evidence.json", &rows)?;
    out.write_all()?;
    Ok(exit_code(ok))
}

fn pointwise_csv(r: &ElpdResult) -> AppResult<Vec<u8>> {
    let rows = r.pointwise.iter().enumerate().map(|(i, v)| {
        let mut row = vec![i.to_string(), v.to_string()];
        if let Some(k) = &r.khat {
            row.push(k[i].to_string());
        }
        row
    });
    if r.khat.is_some() {
        table_csv(&["obs_index", "pointwise", "khat"], rows)
    } else {
        table_csv(&["obs_index", "pointwise"], rows)
    }
}

/// Result without the pointwise vectors, for the JSON report.
fn elpd_brief(r: &ElpdResult) -> serde_json::Value {
    json!({
        "method": r.method, "elpd": r.elpd, "se": r.se, "p_eff": r.p_eff,
        "n_bad_khat": r.n_bad_khat, "warnings": r.warnings,
    })
}

fn compare_models(cfg: &mut RunConfig, args: &CompareArgs) -> AppResult<u8> {
    if let Some(d) = &args.data {
        cfg.data = Some(d.clone());
    }
    args.sampler.apply(cfg);
    if !args.methods.is_empty() {
        cfg.comparison.methods = args.methods.iter().map(|&m| m.into()).collect();
    }
    if let Some(k) = args.k {
        cfg.comparison.k = k;
    }
    if args.by_subject {
        cfg.comparison.scheme = bayes_lmm_core::compare::FoldScheme::BySubject;
    }
    let (data, _) = load(cfg)?;
    let models = [
        ("cond", ModelSpec::full(cfg.prior)),
        ("null", ModelSpec::null(cfg.prior)),
    ];

    let needs_draws = cfg
        .comparison
        .methods
        .iter()
        .any(|m| *m != ElpdMethod::Kfold);
    let mut fits = Vec::new();
    let mut gates_ok = true;
    if needs_draws {
        for (name, spec) in models {
            let draws = run::fit(&data, spec, &cfg.sampler)?;
            let gate = convergence_gate(&draws);
            for m in &gate.messages {
                eprintln!("warning: {name} model: {m}");
            }
            gates_ok &= gate.passed;
            fits.push((name, pointwise_log_lik(&draws, &data)?));
        }
    }

    let mut out = Outputs::new(&cfg.out);
    let mut report = serde_json::Map::new();
    let mut table_rows = Vec::new();
    for &method in &cfg.comparison.methods {
        let mut results = Vec::new();
        for (i, (name, spec)) in models.iter().enumerate() {
            let r = match method {
                ElpdMethod::Waic => waic(&fits[i].1)?,
                ElpdMethod::PsisLoo => psis_loo(&fits[i].1)?,
                ElpdMethod::Kfold => run::kfold(
                    &data,
                    *spec,
                    &cfg.sampler,
                    cfg.comparison.k,
                    cfg.comparison.scheme,
                    cfg.sampler.base_seed,
                )?,
            };
            for w in &r.warnings {
                eprintln!("warning: {name} {method}: {w}");
            }
            out.add(format!("pointwise_{method}_{name}.csv"), pointwise_csv(&r)?);
            results.push((name.to_string(), r));
        }
        let ranking = compare(&results)?;
        for row in &ranking {
            println!(
                "{:<9} {:<6} elpd {:>10.2} (se {:>6.2})  diff {:>8.2} (se {:>6.2})",
                method.to_string(),
                row.model,
                row.elpd,
                row.se,
                row.elpd_diff,
                row.se_diff
            );
        }
        table_rows.extend(ranking.iter().cloned());
        report.insert(
            method.to_string(),
            json!({
                "models": results.iter().map(|(n, r)| (n.clone(), elpd_brief(r))).collect::<serde_json::Map<_, _>>(),
                "ranking": ranking,
            }),
        );
    }
    out.add("comparison.csv", records_csv(&table_rows)?);
    out.add_json("comparison.json", &report)?;
    out.add_json("compare_config.json", cfg)?;
    out.write_all()?;
    Ok(exit_code(gates_ok))
}

fn demo(cfg: &RunConfig, args: &DemoArgs) -> AppResult<u8> {
    let priors: Vec<(f64, f64)> = if args.priors.is_empty() {
        vec![(1.0, 1.0), (10.0, 10.0)]
    } else {
        args.priors
            .iter()
            .map(|s| parse_pair(s, ','))
            .collect::<AppResult<_>>()?
    };
    let ns = if args.ns.is_empty() {
        vec![10, 100]
    } else {
        args.ns.clone()
    };
    if !(0.0..=1.0).contains(&args.proportion) {
        return Err(AppError::Usage(format!(
            "--proportion must lie in [0, 1], got {}",
            args.proportion
        )));
    }
    let mut out = Outputs::new(&cfg.out);
    let mut cells = Vec::new();
    for &(a, b) in &priors {
        for &n in &ns {
            let k = (args.proportion * n as f64).round() as u64;
            let post = beta_binomial_posterior(a, b, BinomialExperiment::new(n, k)?, args.grid)?;
            out.add(
                format!("demo_beta_{a}_{b}_n{n}.csv"),
                records_csv(&post.grid)?,
            );
            println!(
                "Beta({a}, {b}), n = {n}, k = {k}: posterior Beta({}, {}), mean {:.4}",
                post.posterior_a, post.posterior_b, post.posterior_mean
            );
            cells.push(json!({
                "prior_a": a, "prior_b": b, "n": n, "k": k,
                "posterior_a": post.posterior_a, "posterior_b": post.posterior_b,
                "posterior_mean": post.posterior_mean,
            }));
        }
    }
    out.add_json("demo.json", &cells)?;
    out.write_all()?;
    Ok(EXIT_OK)
}

fn simulate(cfg: &mut RunConfig, args: &SimulateArgs) -> AppResult<u8> {
    let mut truth = PopulationParams::reading_time_study();
    if let Some(b) = args.beta0 {
        truth.beta0 = b;
    }
    if let Some(b) = args.beta1 {
        truth.beta1 = b;
    }
    if let Some(s) = args.sigma {
        truth.sigma = s;
    }
    let data = simulate_dataset(&truth, args.n_subj, args.n_item, cfg.sampler.base_seed)?;
    let data_path = cfg.out.join("simulated.tsv");
    cfg.data = Some(data_path.clone());

    let mut out = Outputs::new(&cfg.out);
    out.add("simulated.tsv", dataset_tsv(&data));
    out.add_json("truth.json", &truth)?;
    out.add_json("config.json", cfg)?;
    out.write_all()?;
    println!(
        "wrote {} trials ({} subjects x {} items) to {}",
        data.n_obs(),
        data.n_subj(),
        data.n_item(),
        data_path.display()
    );
    Ok(EXIT_OK)
}
