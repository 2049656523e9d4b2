use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::OutputFormat;
use crate::error::{Error, Result};

/// How a row's verdict is decided.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// `|estimate - target| <= tolerance + z * stderr + target_error_bound`.
    Within,
    /// `estimate <= tolerance + z * stderr`.
    AtMost,
    /// Reported only; always passes.
    Info,
}

/// One measured quantity at one torus size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    #[serde(rename = "N")]
    pub side: usize,
    pub quantity: String,
    pub estimate: f64,
    pub stderr: f64,
    pub target: f64,
    pub target_error_bound: f64,
    pub rule: Rule,
    pub tolerance: f64,
    pub z: f64,
    pub pass: bool,
}

impl ReportRow {
    pub fn new(side: usize, quantity: impl Into<String>, estimate: f64) -> Self {
        ReportRow {
            side,
            quantity: quantity.into(),
            estimate,
            stderr: 0.0,
            target: 0.0,
            target_error_bound: 0.0,
            rule: Rule::Info,
            tolerance: 0.0,
            z: 0.0,
            pass: true,
        }
        .judged()
    }

    pub fn stderr(mut self, stderr: f64) -> Self {
        self.stderr = stderr;
        self.judged()
    }

    pub fn target(mut self, target: f64, error_bound: f64) -> Self {
        self.target = target;
        self.target_error_bound = error_bound;
        self.judged()
    }

    pub fn rule(mut self, rule: Rule, tolerance: f64, z: f64) -> Self {
        self.rule = rule;
        self.tolerance = tolerance;
        self.z = z;
        self.judged()
    }

    /// `|estimate - target|`.
    pub fn deviation(&self) -> f64 {
        (self.estimate - self.target).abs()
    }

    /// The verdict as a function of the row alone.
    pub fn verdict(&self) -> bool {
        let slack = self.tolerance + self.z * self.stderr;
        match self.rule {
            Rule::Within => self.deviation() <= slack + self.target_error_bound,
            Rule::AtMost => self.estimate <= slack,
            Rule::Info => true,
        }
    }

    fn judged(mut self) -> Self {
        self.pass = self.verdict();
        self
    }
}

/// A verdict spanning several rows, such as a trend across `N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub seed: u64,
    pub workers: usize,
    pub wall_time_secs: f64,
    pub version: String,
    pub warnings: Vec<String>,
}

impl Metadata {
    pub fn new(seed: u64, workers: usize) -> Self {
        Metadata {
            seed,
            workers,
            wall_time_secs: 0.0,
            version: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).into(),
            warnings: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub rows: Vec<ReportRow>,
    pub checks: Vec<Check>,
    pub metadata: Metadata,
}

/// CSV header; one line per row in this column order.
pub const CSV_COLUMNS: [&str; 11] = [
    "experiment",
    "N",
    "quantity",
    "estimate",
    "stderr",
    "target",
    "target_error_bound",
    "rule",
    "tolerance",
    "z",
    "pass",
];

impl ExperimentReport {
    pub fn new(experiment: impl Into<String>, seed: u64, workers: usize) -> Self {
        ExperimentReport {
            experiment: experiment.into(),
            rows: Vec::new(),
            checks: Vec::new(),
            metadata: Metadata::new(seed, workers),
        }
    }

    /// All row verdicts and all checks pass.
    pub fn passed(&self) -> bool {
        self.rows.iter().all(ReportRow::verdict) && self.checks.iter().all(|c| c.pass)
    }

    pub fn rows_named<'a>(&'a self, quantity: &'a str) -> impl Iterator<Item = &'a ReportRow> + 'a {
        self.rows.iter().filter(move |r| r.quantity == quantity)
    }

    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        out.write_record(CSV_COLUMNS)?;
        for r in &self.rows {
            out.serialize((&self.experiment, r))?;
        }
        out.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Human-readable summary, one line per row and check.
    pub fn summary(&self) -> String {
        let mut s = String::new();
        for r in &self.rows {
            s.push_str(&format!(
                "{} N={:<3} {:<28} est={:<12} se={:<9.2e} target={:<12} {}\n",
                self.experiment,
                r.side,
                r.quantity,
                short(r.estimate),
                r.stderr,
                short(r.target),
                if r.pass { "ok" } else { "FAIL" }
            ));
        }
        for c in &self.checks {
            s.push_str(&format!(
                "{} check {:<30} {} ({})\n",
                self.experiment,
                c.name,
                if c.pass { "ok" } else { "FAIL" },
                c.detail
            ));
        }
        s
    }
}

fn short(v: f64) -> String {
    if v == 0.0 || (1e-3..1e6).contains(&v.abs()) {
        format!("{v:.6}")
    } else {
        format!("{v:.4e}")
    }
}

/// Writes the report; CSV carries the rows only, JSON the whole report.
pub fn emit_report(report: &ExperimentReport, path: &Path, format: OutputFormat) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    match format {
        OutputFormat::Csv => report.write_csv(&mut w).map_err(|e| match e {
            Error::Io { source, .. } => Error::io(path, source),
            other => other,
        })?,
        OutputFormat::Json => {
            let text = report.to_json()?;
            w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdicts_follow_the_rule() {
        let r = ReportRow::new(8, "p", 0.54)
            .stderr(0.01)
            .target(0.5, 0.0)
            .rule(Rule::Within, 0.02, 3.0);
        assert!(r.pass);
        let r = r.rule(Rule::Within, 0.0, 1.0);
        assert!(!r.pass);
        assert!(ReportRow::new(8, "c", 0.4).rule(Rule::AtMost, 0.5, 0.0).pass);
        assert!(!ReportRow::new(8, "c", 0.6).rule(Rule::AtMost, 0.5, 0.0).pass);
    }

    #[test]
    fn empty_report_is_header_only() {
        let rep = ExperimentReport::new("theorem1", 1, 1);
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "experiment,N,quantity,estimate,stderr,target,target_error_bound,rule,tolerance,z,pass\n"
        );
        assert!(rep.passed());
    }

    #[test]
    fn csv_row_layout() {
        let mut rep = ExperimentReport::new("theorem1", 1, 1);
        rep.rows.push(
            ReportRow::new(8, "survival", 0.25)
                .stderr(0.5)
                .target(1.0, 0.125)
                .rule(Rule::Within, 0.03, 3.0),
        );
        let mut buf = Vec::new();
        rep.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text.lines().nth(1).unwrap(),
            "theorem1,8,survival,0.25,0.5,1.0,0.125,within,0.03,3.0,true"
        );
    }

    #[test]
    fn json_round_trip() {
        let mut rep = ExperimentReport::new("capacity", 3, 2);
        rep.rows.push(ReportRow::new(12, "cap", 1.0 / 3.0).stderr(1e-17));
        rep.checks.push(Check::new("trend", false, "x"));
        rep.metadata.warnings.push("w".into());
        let back = ExperimentReport::from_json(&rep.to_json().unwrap()).unwrap();
        assert_eq!(back, rep);
        assert!(!back.passed());
    }

    #[test]
    fn emit_reports_path_errors() {
        let rep = ExperimentReport::new("x", 0, 1);
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "").unwrap();
        let err = emit_report(&rep, &blocker.join("out.csv"), OutputFormat::Csv).unwrap_err();
        assert!(err.to_string().contains("file"));
        let ok = dir.path().join("sub/out.json");
        emit_report(&rep, &ok, OutputFormat::Json).unwrap();
        assert!(std::fs::read_to_string(ok).unwrap().contains("\"experiment\""));
    }
}
