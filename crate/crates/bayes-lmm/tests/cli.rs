use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn bin(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bayes-lmm"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Simulate a small dataset into `dir` and return its path.
fn simulated(dir: &Path) -> String {
    let o = bin(
        dir,
        &["--seed", "5", "simulate", "--n-subj", "12", "--n-item", "8"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    dir.join("simulated.tsv").to_string_lossy().into_owned()
}

const SHORT: [&str; 6] = ["--chains", "2", "--iter", "600", "--warmup", "300"];

#[test]
fn coin_toss_bayes_factor() {
    let dir = tempdir().unwrap();
    let o = bin(
        dir.path(),
        &[
            "evidence", "coin", "--n", "5", "--k", "4", "--p0", "0.5", "--p1", "0.8",
        ],
    );
    assert_eq!(code(&o), 0);
    let v: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("evidence.json")).unwrap()).unwrap();
    assert!((v["bf01"].as_f64().unwrap() - 0.15625 / 0.4096).abs() < 1e-12);
    assert!(stdout(&o).contains("BF01 = 0.3815"));
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempdir().unwrap();
    assert_eq!(code(&bin(dir.path(), &["no-such-command"])), 1);
    assert_eq!(
        code(&bin(
            dir.path(),
            &["evidence", "coin", "--n", "5", "--k", "9", "--p1", "0.5"]
        )),
        1
    );
    assert_eq!(
        code(&bin(
            dir.path(),
            &["evidence", "coin", "--n", "5", "--k", "4"]
        )),
        1
    );
    assert_eq!(
        code(&bin(
            dir.path(),
            &["fit", "--data", "/definitely/missing.tsv"]
        )),
        1
    );
    assert_eq!(code(&bin(dir.path(), &["fit"])), 1);
    assert_eq!(code(&bin(dir.path(), &["evidence", "savage-dickey"])), 1);
    assert_eq!(code(&bin(dir.path(), &["--help"])), 0);
}

#[test]
fn header_only_data_is_an_input_error() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("empty.tsv");
    fs::write(&path, "subj\titem\ttype\tregion\trt\n").unwrap();
    let o = bin(dir.path(), &["fit", "--data", path.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("no observations"));
}

#[test]
fn fit_is_reproducible_and_summarize_matches() {
    let dir = tempdir().unwrap();
    let data = simulated(dir.path());
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let args: Vec<&str> = ["fit", "--data", &data].into_iter().chain(SHORT).collect();
    let oa = bin(&a, &args);
    assert!(
        matches!(code(&oa), 0 | 2),
        "{}",
        String::from_utf8_lossy(&oa.stderr)
    );
    for f in [
        "draws.csv",
        "diagnostics.json",
        "summary.json",
        "load_report.json",
        "config.json",
    ] {
        assert!(a.join(f).exists(), "missing {f}");
    }

    // Same config and seed, more threads: identical bytes.
    let cfg = a.join("config.json");
    let ob = Command::new(env!("CARGO_BIN_EXE_bayes-lmm"))
        .args([
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            b.to_str().unwrap(),
            "--threads",
            "3",
            "fit",
        ])
        .output()
        .unwrap();
    assert_eq!(code(&ob), code(&oa));
    for f in ["draws.csv", "summary.json", "load_report.json"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f} differs"
        );
    }

    let os = bin(&a, &["summarize", "--json"]);
    assert_eq!(code(&os), 0);
    assert_eq!(os.stdout, fs::read(a.join("summary.json")).unwrap());

    let table = stdout(&bin(&a, &["summarize"]));
    assert!(table.contains("P(cond < 0)") && table.contains("HPDI") && table.contains("ROPE"));

    let unknown = bin(&a, &["summarize", "--param", "slope"]);
    assert_eq!(code(&unknown), 1);
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("available: intercept, cond"));

    let sd = bin(
        &a,
        &[
            "evidence",
            "savage-dickey",
            "--draws",
            a.join("draws.csv").to_str().unwrap(),
        ],
    );
    assert_eq!(code(&sd), 0);
    let v: serde_json::Value =
        serde_json::from_slice(&fs::read(a.join("evidence.json")).unwrap()).unwrap();
    assert!(v[0]["bf01"].as_f64().unwrap() > 0.0);
    assert_eq!(v[0]["method"], "savage_dickey");
}

#[test]
fn diagnostics_report_has_every_parameter() {
    let dir = tempdir().unwrap();
    let data = simulated(dir.path());
    let args: Vec<&str> = ["fit", "--data", &data].into_iter().chain(SHORT).collect();
    let o = bin(dir.path(), &args);
    assert!(matches!(code(&o), 0 | 2));
    let v: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("diagnostics.json")).unwrap()).unwrap();
    assert!(v["cond"]["rhat"].is_number());
    assert!(v["z_subj.11.1"]["ess"].is_number());
    assert!(v["divergences"].is_u64());
    assert!(v["seconds_elapsed"].is_number());
    let passed = v["gate"]["passed"].as_bool().unwrap();
    assert_eq!(code(&o), if passed { 0 } else { 2 });
}

#[test]
fn demo_writes_grids() {
    let dir = tempdir().unwrap();
    let o = bin(
        dir.path(),
        &[
            "demo", "--prior", "1,1", "--n", "0", "--n", "10", "--grid", "11",
        ],
    );
    assert_eq!(code(&o), 0);
    let empty = fs::read_to_string(dir.path().join("demo_beta_1_1_n0.csv")).unwrap();
    let mut lines = empty.lines();
    assert_eq!(lines.next().unwrap(), "p,prior,likelihood,posterior");
    for l in lines {
        let f: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(f[1], f[3], "n = 0 posterior equals prior");
    }
    assert!(stdout(&o).contains("posterior Beta(5, 7)"));
}

#[test]
fn compare_and_sensitivity_run_on_simulated_data() {
    let dir = tempdir().unwrap();
    let data = simulated(dir.path());
    let args: Vec<&str> = [
        "compare", "--data", &data, "--method", "waic", "--method", "psis-loo",
    ]
    .into_iter()
    .chain(SHORT)
    .collect();
    let o = bin(dir.path(), &args);
    assert!(
        matches!(code(&o), 0 | 2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let v: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("comparison.json")).unwrap()).unwrap();
    assert_eq!(v["psis_loo"]["ranking"].as_array().unwrap().len(), 2);
    let pw = fs::read_to_string(dir.path().join("pointwise_psis_loo_cond.csv")).unwrap();
    assert!(pw.starts_with("obs_index,pointwise,khat\n"));
    assert_eq!(pw.lines().count(), 12 * 8 + 1);

    let args: Vec<&str> = [
        "sensitivity",
        "--data",
        &data,
        "--prior",
        "0,1",
        "--prior",
        "-0.18,0.02",
    ]
    .into_iter()
    .chain(SHORT)
    .collect();
    let o = bin(dir.path(), &args);
    assert!(matches!(code(&o), 0 | 2));
    let csv = fs::read_to_string(dir.path().join("sensitivity.csv")).unwrap();
    assert!(csv.starts_with("prior,lower,upper,prob_negative,estimate,max_rhat,error\n"));
    assert_eq!(csv.lines().count(), 3);
}
