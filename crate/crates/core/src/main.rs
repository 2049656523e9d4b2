use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use interlace::experiments::{emit_report, run, Experiment, ExperimentConfig, OutputFormat};

#[derive(Parser)]
#[command(name = "interlace", version, about = "Hitting times of the random walk on the discrete torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// P[H_B > u N^d] against the product of exp(-u cap(K_i))
    Theorem1(Common),
    /// Exponential law of the Poissonized entrance time
    Exponentiality(Common),
    /// Joint vacancy of two distant windows
    Independence(Common),
    /// cap(psi(B)) and N^d / E[H_B] with the variational bounds
    Capacity(Common),
    /// Exact flow identities and the variational sandwich
    FlowsCheck(Common),
}

#[derive(Args)]
struct Common {
    /// TOML file overriding the defaults of the subcommand
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Report path; without it the summary goes to stdout only
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json
    #[arg(long)]
    format: Option<OutputFormat>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, common) = match cli.command {
        Command::Theorem1(c) => (Experiment::Theorem1, c),
        Command::Exponentiality(c) => (Experiment::Exponentiality, c),
        Command::Independence(c) => (Experiment::Independence, c),
        Command::Capacity(c) => (Experiment::Capacity, c),
        Command::FlowsCheck(c) => (Experiment::FlowsCheck, c),
    };
    match execute(experiment, common) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn execute(experiment: Experiment, common: Common) -> interlace::Result<bool> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::from_file(path, experiment)?,
        None => ExperimentConfig::default_for(experiment),
    };
    cfg.experiment = experiment;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    if let Some(o) = common.out {
        cfg.out = Some(o);
    }
    if let Some(f) = common.format {
        cfg.format = f;
    }
    let report = run(&cfg)?;
    print!("{}", report.summary());
    for w in &report.metadata.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(path) = &cfg.out {
        emit_report(&report, path, cfg.format)?;
    }
    let passed = report.passed();
    println!(
        "{}: {} ({:.1} s)",
        experiment,
        if passed { "PASS" } else { "FAIL" },
        report.metadata.wall_time_secs
    );
    Ok(passed)
}
