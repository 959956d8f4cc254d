use std::fs;

use bayes_lmm::error::AppError;
use bayes_lmm::io::{
    dataset_tsv, draws_csv, load_dataset, read_draws_csv, write_atomic, LoadOptions, Outputs,
};
use bayes_lmm_core::data::simulate_dataset;
use bayes_lmm_core::model::PopulationParams;
use bayes_lmm_core::sampler::run_chains;
use bayes_lmm_core::sampler::targets::IsoGaussian;
use bayes_lmm_core::SamplerConfig;
use tempfile::tempdir;

const SAMPLE: &str = "\
\"subj\" \"item\" \"type\" \"pos\" \"word\" \"correct\" \"rt\" \"region\"
\"1\" 1 13 \"obj-ext\" 6 \"x\" \"-\" 1140 \"de1\"
\"2\" 1 13 \"obj-ext\" 8 \"y\" \"-\" 1197 \"headnoun\"
\"3\" 1 6 \"subj-ext\" 8 \"y\" \"-\" 714 \"headnoun\"
\"4\" 2 6 \"obj-ext\" 8 \"y\" \"-\" NA \"headnoun\"
\"5\" 2 13 \"subj-ext\" 8 \"y\" \"-\" 803 \"headnoun\"
";

#[test]
fn loads_r_style_table_with_row_names() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("data.txt");
    fs::write(&path, SAMPLE).unwrap();
    let (data, report) = load_dataset(&path, &LoadOptions::default()).unwrap();
    assert_eq!(report.rows_read, 5);
    assert_eq!(report.rows_dropped_region, 1);
    assert_eq!(report.rows_dropped_missing, 1);
    assert_eq!(report.rows_kept, 3);
    assert_eq!((data.n_subj(), data.n_item()), (2, 2));
    let conds: Vec<f64> = data.records.iter().map(|r| r.cond).collect();
    assert_eq!(conds, vec![1.0, -1.0, -1.0]);
    assert!((data.records[0].log_rt - 1197f64.ln()).abs() < 1e-12);
}

#[test]
fn missing_column_is_named() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("data.tsv");
    fs::write(&path, "subj\titem\ttype\tregion\n1\t1\tobj-ext\theadnoun\n").unwrap();
    match load_dataset(&path, &LoadOptions::default()) {
        Err(AppError::MissingColumn { column, .. }) => assert_eq!(column, "rt"),
        other => panic!("expected missing column error, got {other:?}"),
    }
}

#[test]
fn header_only_file_has_no_observations() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("data.tsv");
    fs::write(&path, "subj\titem\ttype\tregion\trt\n").unwrap();
    let (data, report) = load_dataset(&path, &LoadOptions::default()).unwrap();
    assert_eq!(data.n_obs(), 0);
    assert_eq!(report.rows_read, 0);
}

#[test]
fn ragged_rows_are_rejected() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("data.tsv");
    fs::write(&path, "subj\titem\ttype\tregion\trt\n1\t1\tobj-ext\n").unwrap();
    assert!(matches!(
        load_dataset(&path, &LoadOptions::default()),
        Err(AppError::Format { .. })
    ));
}

#[test]
fn simulated_dataset_round_trips_through_tsv() {
    let data = simulate_dataset(&PopulationParams::reading_time_study(), 6, 4, 1).unwrap();
    let dir = tempdir().unwrap();
    let path = dir.path().join("sim.tsv");
    fs::write(&path, dataset_tsv(&data)).unwrap();
    let (back, report) = load_dataset(&path, &LoadOptions::default()).unwrap();
    assert_eq!(report.rows_kept, data.n_obs());
    assert_eq!(back.n_subj(), data.n_subj());
    for (a, b) in back.records.iter().zip(&data.records) {
        assert_eq!((a.subj, a.item, a.cond), (b.subj, b.item, b.cond));
        assert!((a.log_rt - b.log_rt).abs() < 1e-12);
    }
}

#[test]
fn draws_round_trip_exactly() {
    let cfg = SamplerConfig {
        chains: 2,
        iter: 300,
        warmup: 150,
        ..SamplerConfig::default()
    };
    let draws = run_chains(&IsoGaussian::new(3), &cfg).unwrap();
    let dir = tempdir().unwrap();
    let path = dir.path().join("draws.csv");
    let bytes = draws_csv(&draws).unwrap();
    let header = String::from_utf8(bytes.clone())
        .unwrap()
        .lines()
        .next()
        .unwrap()
        .to_string();
    assert_eq!(header, "x0,x1,x2,chain,iteration");
    fs::write(&path, &bytes).unwrap();
    let back = read_draws_csv(&path).unwrap();
    assert_eq!(back.values, draws.values);
    assert_eq!(back.chain_ids, draws.chain_ids);
    assert_eq!(back.diagnostics, draws.diagnostics);
}

#[test]
fn outputs_are_written_together() {
    let dir = tempdir().unwrap();
    let mut out = Outputs::new(dir.path().join("nested"));
    out.add("a.txt", b"one".to_vec());
    out.add_json("b.json", &serde_json::json!({"x": 1}))
        .unwrap();
    assert!(!dir.path().join("nested").exists());
    out.write_all().unwrap();
    assert_eq!(fs::read(dir.path().join("nested/a.txt")).unwrap(), b"one");
    assert_eq!(
        fs::read_to_string(dir.path().join("nested/b.json")).unwrap(),
        "{\n  \"x\": 1\n}\n"
    );
    write_atomic(&dir.path().join("nested/a.txt"), b"two").unwrap();
    assert_eq!(fs::read(dir.path().join("nested/a.txt")).unwrap(), b"two");
    let leftovers = fs::read_dir(dir.path().join("nested")).unwrap().count();
    assert_eq!(leftovers, 2);
}
