//! A reduced theorem1 run written as a JSON report.

use interlace::experiments::{emit_report, run, Experiment, ExperimentConfig, OutputFormat};

fn main() -> interlace::Result<()> {
    let mut cfg = ExperimentConfig::default_for(Experiment::Theorem1);
    cfg.sides = vec![8, 12];
    cfg.trials = 10_000;
    cfg.capacity_radius = 24;
    let report = run(&cfg)?;
    print!("{}", report.summary());
    let path = std::env::temp_dir().join("interlace-theorem1.json");
    emit_report(&report, &path, OutputFormat::Json)?;
    println!("passed: {}  report at {}", report.passed(), path.display());
    Ok(())
}
