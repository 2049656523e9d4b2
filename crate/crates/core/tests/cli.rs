//! The `interlace` binary and its TOML configuration.

use std::process::Command;

use interlace::experiments::{Experiment, ExperimentConfig, ExperimentReport, CSV_COLUMNS};

fn interlace(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_interlace")).args(args).output().unwrap()
}

const SMALL_FLOWS: &str = "sides = [8]\nflow_sides = [4]\nflow_fields = 5\n";

#[test]
fn exit_code_follows_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let ok = dir.path().join("ok.toml");
    std::fs::write(&ok, SMALL_FLOWS).unwrap();
    let out = dir.path().join("reports/flows.csv");
    let run = interlace(&[
        "flows-check",
        "--config",
        ok.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stdout));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().next().unwrap(), CSV_COLUMNS.join(","));

    let strict = dir.path().join("strict.toml");
    std::fs::write(&strict, format!("{SMALL_FLOWS}flow_constant = 0.01\n")).unwrap();
    let run = interlace(&["flows-check", "--config", strict.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&run.stdout).contains("FAIL"));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "no_such_key = 1\n").unwrap();
    let run = interlace(&["flows-check", "--config", bad.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(2));
}

#[test]
fn json_report_from_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, SMALL_FLOWS).unwrap();
    let out = dir.path().join("r.json");
    let run = interlace(&[
        "flows-check",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "9",
        "--workers",
        "2",
        "--format",
        "json",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(run.status.code(), Some(0));
    let report = ExperimentReport::from_json(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(report.metadata.seed, 9);
    assert_eq!(report.metadata.workers, 2);
    assert!(report.passed());
}

#[test]
fn config_survives_a_toml_round_trip() {
    for kind in [Experiment::Theorem1, Experiment::Independence, Experiment::FlowsCheck] {
        let mut cfg = ExperimentConfig::default_for(kind);
        cfg.seed = 123;
        cfg.t_grid = vec![0.5, 1.5];
        let text = toml::to_string(&cfg).unwrap();
        let back = ExperimentConfig::from_toml(&text, Experiment::Capacity).unwrap();
        assert_eq!(back, cfg, "{text}");
    }
}
