use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Point, PointSet, TorusGeometry};

/// The experiments the harness knows about.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Theorem1,
    Exponentiality,
    Independence,
    Capacity,
    FlowsCheck,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Theorem1 => "theorem1",
            Experiment::Exponentiality => "exponentiality",
            Experiment::Independence => "independence",
            Experiment::Capacity => "capacity",
            Experiment::FlowsCheck => "flows-check",
        }
    }

    /// Distinguishes the random streams of different experiments run with the
    /// same seed.
    pub(crate) fn tag(self) -> u64 {
        match self {
            Experiment::Theorem1 => 1,
            Experiment::Exponentiality => 2,
            Experiment::Independence => 3,
            Experiment::Capacity => 4,
            Experiment::FlowsCheck => 5,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How the window centers are placed on the torus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Centers {
    /// `"separated"`: `x_i = floor(i N / M) (1, .., 1)`, which for `M = 2`
    /// puts the two centers at antipodal points.
    Rule(CenterRule),
    /// The same torus points for every `N`, reduced mod `N`.
    Explicit(Vec<Point>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CenterRule {
    Separated,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!("unknown format {other:?}"))),
        }
    }
}

/// Everything an experiment run depends on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub sides: Vec<usize>,
    pub dim: usize,
    pub u: f64,
    /// The window sets `K_i`, as lists of lattice points.
    pub windows: Vec<Vec<Point>>,
    pub centers: Centers,
    pub trials: u64,
    /// Trials per random stream; fixes the stream layout.
    pub batch_size: u64,
    pub seed: u64,
    pub workers: usize,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
    /// Box radius for capacities.
    pub capacity_radius: usize,
    /// Walks are cut after `step_cap_factor * N^d` steps where the horizon is
    /// not fixed by the event itself.
    pub step_cap_factor: f64,
    pub t_grid: Vec<f64>,
    /// Pass threshold of the headline comparison.
    pub tolerance: f64,
    /// Number of standard errors added to `tolerance`.
    pub z: f64,
    /// Pinned constant for `|J|_inf N^{d-1}` in the flows check.
    pub flow_constant: f64,
    /// Random fields per `(d, N)` in the flows check.
    pub flow_fields: usize,
    pub flow_sides: Vec<usize>,
    pub flow_dims: Vec<usize>,
}

/// The t-grid `0.1, 0.2, .., 3.0`.
pub fn default_t_grid() -> Vec<f64> {
    (1..=30).map(|k| k as f64 / 10.0).collect()
}

impl ExperimentConfig {
    pub fn default_for(experiment: Experiment) -> Self {
        let singleton = vec![vec![Point::origin(3)]];
        let mut cfg = ExperimentConfig {
            experiment,
            sides: vec![8, 12, 16, 20],
            dim: 3,
            u: 1.0,
            windows: singleton.clone(),
            centers: Centers::Rule(CenterRule::Separated),
            trials: 100_000,
            batch_size: 1_000,
            seed: 20_240_601,
            workers: 1,
            out: None,
            format: OutputFormat::Csv,
            capacity_radius: 48,
            step_cap_factor: 100.0,
            t_grid: default_t_grid(),
            tolerance: 0.03,
            z: 3.0,
            flow_constant: 2.0,
            flow_fields: 100,
            flow_sides: vec![4, 8, 16],
            flow_dims: vec![1, 2, 3],
        };
        match experiment {
            Experiment::Theorem1 => {}
            Experiment::Exponentiality => {
                cfg.sides = vec![8, 12, 16];
                cfg.tolerance = 0.5;
            }
            Experiment::Independence => {
                cfg.sides = vec![20];
                cfg.windows = vec![singleton[0].clone(), singleton[0].clone()];
                cfg.tolerance = 0.02;
            }
            Experiment::Capacity => {
                cfg.windows = vec![singleton[0].clone(), singleton[0].clone()];
                cfg.tolerance = 1e-9;
            }
            Experiment::FlowsCheck => {
                cfg.sides = vec![8, 12, 16];
                cfg.windows = vec![singleton[0].clone(), singleton[0].clone()];
                cfg.tolerance = 1e-10;
            }
        }
        cfg
    }

    /// Reads a TOML file on top of the defaults of its experiment (or of
    /// `fallback` when the file does not name one).
    pub fn from_file(path: &Path, fallback: Experiment) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, fallback)
    }

    pub fn from_toml(text: &str, fallback: Experiment) -> Result<Self> {
        let file: ConfigFile =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut cfg = Self::default_for(file.experiment.unwrap_or(fallback));
        file.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.sides.is_empty() {
            return bad("sides is empty".into());
        }
        if self.sides.iter().any(|&n| n < 3) {
            return bad("every side must be at least 3".into());
        }
        if self.dim == 0 {
            return bad("dim must be positive".into());
        }
        if !(self.u >= 0.0 && self.u.is_finite()) {
            return bad(format!("u = {} must be finite and >= 0", self.u));
        }
        if self.trials < 100 {
            return bad(format!("trials = {} is below 100", self.trials));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.workers == 0 {
            return bad("workers must be positive".into());
        }
        if self.windows.is_empty() {
            return bad("at least one window is needed".into());
        }
        for w in &self.windows {
            if w.is_empty() {
                return bad("windows must be nonempty".into());
            }
            if w.iter().any(|p| p.dim() != self.dim) {
                return bad("window points must have dimension dim".into());
            }
        }
        if let Centers::Explicit(cs) = &self.centers {
            if cs.len() != self.windows.len() {
                return bad(format!(
                    "{} centers for {} windows",
                    cs.len(),
                    self.windows.len()
                ));
            }
            if cs.iter().any(|p| p.dim() != self.dim) {
                return bad("centers must have dimension dim".into());
            }
        }
        if self.t_grid.iter().any(|t| !(*t >= 0.0)) {
            return bad("t_grid values must be >= 0".into());
        }
        if !(self.step_cap_factor > 0.0) {
            return bad("step_cap_factor must be positive".into());
        }
        Ok(())
    }

    pub fn window_sets(&self) -> Result<Vec<PointSet>> {
        self.windows
            .iter()
            .map(|w| PointSet::lattice(self.dim, w.iter().cloned()))
            .collect()
    }

    /// Centers for side `N`.
    pub fn centers_for(&self, geom: &TorusGeometry) -> Vec<Point> {
        match &self.centers {
            Centers::Explicit(cs) => cs.iter().map(|c| geom.project(c)).collect(),
            Centers::Rule(CenterRule::Separated) => {
                let m = self.windows.len();
                let n = geom.side();
                (0..m)
                    .map(|i| Point::splat(geom.dim(), (i * n / m) as i64))
                    .collect()
            }
        }
    }

    pub fn batches(&self) -> u64 {
        self.trials.div_ceil(self.batch_size)
    }
}

/// The on-disk form: every key optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    experiment: Option<Experiment>,
    sides: Option<Vec<usize>>,
    dim: Option<usize>,
    u: Option<f64>,
    windows: Option<Vec<Vec<Point>>>,
    centers: Option<Centers>,
    trials: Option<u64>,
    batch_size: Option<u64>,
    seed: Option<u64>,
    workers: Option<usize>,
    out: Option<PathBuf>,
    format: Option<OutputFormat>,
    capacity_radius: Option<usize>,
    step_cap_factor: Option<f64>,
    t_grid: Option<Vec<f64>>,
    tolerance: Option<f64>,
    z: Option<f64>,
    flow_constant: Option<f64>,
    flow_fields: Option<usize>,
    flow_sides: Option<Vec<usize>>,
    flow_dims: Option<Vec<usize>>,
}

impl ConfigFile {
    fn apply(self, cfg: &mut ExperimentConfig) {
        macro_rules! take {
            ($($f:ident),*) => {
                $(if let Some(v) = self.$f { cfg.$f = v; })*
            };
        }
        take!(
            sides, dim, u, windows, centers, trials, batch_size, seed, workers, format,
            capacity_radius, step_cap_factor, t_grid, tolerance, z, flow_constant,
            flow_fields, flow_sides, flow_dims
        );
        if self.out.is_some() {
            cfg.out = self.out;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_overrides_defaults() {
        let text = r#"
            experiment = "independence"
            sides = [12]
            trials = 2000
            seed = 7
            centers = [[0, 0, 0], [6, 6, 6]]
            windows = [[[0, 0, 0]], [[0, 0, 0], [1, 0, 0]]]
            format = "json"
        "#;
        let cfg = ExperimentConfig::from_toml(text, Experiment::Theorem1).unwrap();
        assert_eq!(cfg.experiment, Experiment::Independence);
        assert_eq!(cfg.sides, vec![12]);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.format, OutputFormat::Json);
        assert_eq!(cfg.tolerance, 0.02);
        assert_eq!(cfg.window_sets().unwrap()[1].len(), 2);
        let g = TorusGeometry::new(12, 3).unwrap();
        assert_eq!(cfg.centers_for(&g)[1], Point::splat(3, 6));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for text in [
            "trials = 10",
            "u = -1.0",
            "sides = []",
            "windows = [[]]",
            "centers = [[0, 0, 0]]\nwindows = [[[0,0,0]], [[0,0,0]]]",
            "unknown_key = 3",
            "dim = 2",
        ] {
            assert!(
                matches!(
                    ExperimentConfig::from_toml(text, Experiment::Theorem1),
                    Err(Error::Config(_))
                ),
                "{text}"
            );
        }
    }

    #[test]
    fn separated_centers() {
        let cfg = ExperimentConfig::default_for(Experiment::Independence);
        let g = TorusGeometry::new(20, 3).unwrap();
        assert_eq!(
            cfg.centers_for(&g),
            vec![Point::origin(3), Point::splat(3, 10)]
        );
        let mut one = cfg.clone();
        one.windows.truncate(1);
        assert_eq!(one.centers_for(&g), vec![Point::origin(3)]);
    }
}
