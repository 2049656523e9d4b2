//! Harness for the Monte Carlo and exact checks: configuration, reproducible
//! batched simulation and reports.

mod config;
mod engine;
mod report;
mod runs;

pub use config::{
    default_t_grid, CenterRule, Centers, Experiment, ExperimentConfig, OutputFormat,
};
pub use engine::{run_batches, Plan, Tally};
pub use report::{emit_report, Check, ExperimentReport, Metadata, ReportRow, Rule, CSV_COLUMNS};
pub use runs::{
    run, run_capacity_convergence, run_exponentiality, run_flows_check, run_independence,
    run_theorem1, sandwich, SandwichOutcome, SANDWICH_TOL,
};
