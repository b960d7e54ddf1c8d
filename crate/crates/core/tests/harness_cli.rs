use std::path::PathBuf;
use std::process::Command;

use tksd::geometry::load_polygon_csv;
use tksd::harness::{
    l2_error, read_records_csv, records_from_json, run_experiment, synthetic_polygon, Experiment,
    ExperimentConfig,
};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tksd"))
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

#[test]
fn fixture_polygon_matches_builtin() {
    let loaded = load_polygon_csv(fixture("synthetic_polygon.csv")).unwrap();
    let builtin = synthetic_polygon();
    assert_eq!(loaded.num_edges(), builtin.num_edges());
    for (a, b) in loaded.vertices().iter().zip(builtin.vertices()) {
        assert!((a[0] - b[0]).abs() < 1e-12 && (a[1] - b[1]).abs() < 1e-12);
    }
}

#[test]
fn polygon_path_gives_same_records_as_builtin() {
    let base = ExperimentConfig {
        seeds: 3,
        record_timing: false,
        m_list: Some(vec![8]),
        ..ExperimentConfig::for_experiment(Experiment::PolygonBench)
    };
    let from_file = ExperimentConfig {
        polygon_path: Some(fixture("synthetic_polygon.csv")),
        ..base.clone()
    };
    let a = run_experiment(&base).unwrap().to_csv_string().unwrap();
    let b = run_experiment(&from_file).unwrap().to_csv_string().unwrap();
    assert_eq!(a, b);
}

#[test]
fn estimate_csv_round_trips_and_errors_recompute() {
    let out = bin()
        .args(["estimate", "--seeds", "4", "--no-timing"])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let records = read_records_csv(out.stdout.as_slice()).unwrap();
    assert_eq!(records.len(), 8);
    for (i, r) in records.iter().enumerate() {
        assert_eq!(r.seed, i as u64 / 2);
        assert_eq!(r.method, if i % 2 == 0 { "tksd" } else { "truncsm-approx" });
        assert_eq!(r.wall_time_ms, 0.0);
        assert_eq!(r.error, l2_error(&r.theta_hat, &[0.5, 0.5]));
    }
}

#[test]
fn json_output_parses() {
    let out = bin()
        .args(["estimate", "--seeds", "2", "--json", "--no-timing"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let records = records_from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(records.len(), 4);
    assert!(records
        .iter()
        .all(|r| r.theta_hat.len() == 2 && r.converged));
}

#[test]
fn out_flag_writes_file_matching_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("eps.csv");
    let status = bin()
        .args(["epsilon-table", "--out"])
        .arg(&path)
        .status()
        .unwrap();
    assert!(status.success());
    let stdout = bin().arg("epsilon-table").output().unwrap().stdout;
    let written = std::fs::read(&path).unwrap();
    assert_eq!(written, stdout);
    let text = String::from_utf8(written).unwrap();
    assert!(text.starts_with("m,d,area,epsilon"));
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"experiment": "estimate", "n": 120, "seeds": 10, "base_seed": 7, "methods": ["tksd"]}"#,
    )
    .unwrap();
    let out = bin()
        .args(["estimate", "--seeds", "2", "--no-timing", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let records = read_records_csv(out.stdout.as_slice()).unwrap();
    assert_eq!(
        records.iter().map(|r| r.seed).collect::<Vec<_>>(),
        vec![7, 8]
    );
    assert!(records.iter().all(|r| r.n == 120));
}

#[test]
fn configuration_errors_exit_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let mismatch = dir.path().join("mismatch.json");
    std::fs::write(&mismatch, r#"{"experiment": "mixture"}"#).unwrap();
    let unknown = dir.path().join("unknown.json");
    std::fs::write(&unknown, r#"{"no_such_field": 1}"#).unwrap();
    let cases: Vec<Vec<std::ffi::OsString>> = vec![
        vec!["no-such-experiment".into()],
        vec!["estimate".into(), "--seeds".into(), "0".into()],
        vec!["estimate".into(), "--config".into(), mismatch.into()],
        vec!["estimate".into(), "--config".into(), unknown.into()],
        vec![
            "estimate".into(),
            "--config".into(),
            dir.path().join("missing.json").into(),
        ],
    ];
    for args in cases {
        let out = bin().args(&args).output().unwrap();
        assert_eq!(
            out.status.code(),
            Some(1),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn reruns_are_byte_identical() {
    let run = || {
        bin()
            .args([
                "boundary-dist",
                "--seeds",
                "3",
                "--no-timing",
                "--threads",
                "2",
            ])
            .output()
            .unwrap()
            .stdout
    };
    let a = run();
    assert!(!a.is_empty());
    assert_eq!(a, run());
}
