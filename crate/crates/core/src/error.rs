use std::path::PathBuf;

use crate::lattice::Point;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid torus geometry: {0}")]
    InvalidGeometry(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("no basepoint reaches margin >= 1 (best margin {best})")]
    MarginTooSmall { best: i64 },

    #[error("target set is empty")]
    EmptyTarget,

    #[error("set is empty")]
    EmptySet,

    #[error("solver did not reach residual {tolerance:e} after {iterations} iterations (residual {residual:e})")]
    SolverDiverged {
        iterations: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error("problem has {unknowns} unknowns, above the limit of {limit}")]
    TooLarge { unknowns: usize, limit: usize },

    #[error("constraint violated at {point:?}: {what} (deviation {deviation:e})")]
    ConstraintViolated {
        point: Point,
        what: &'static str,
        deviation: f64,
    },

    #[error("supports of the shifted window functions overlap or touch")]
    SupportsOverlap,

    #[error("normalizer 1 - mean = {0} is not above 1/2")]
    DegenerateNormalizer(f64),

    #[error("edge {from:?} -> {to:?} does not join neighbours")]
    NonAdjacentEdge { from: Point, to: Point },

    #[error("point {0:?} lies outside the domain")]
    OutsideDomain(Point),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
