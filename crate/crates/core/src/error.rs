use std::path::PathBuf;

use thiserror::Error;

use crate::grid::ProfileKind;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("profile kind mismatch: expected {expected:?}, found {found:?}")]
    KindMismatch {
        expected: ProfileKind,
        found: ProfileKind,
    },

    #[error("profile length {found} does not match grid ({expected} values expected)")]
    LengthMismatch { expected: usize, found: usize },

    #[error("profiles live on different grids")]
    GridMismatch,

    #[error("mass function decreases at edge {index} (r = {radius})")]
    DecreasingMassFunction { index: usize, radius: f64 },

    #[error("source is not compactly supported inside the grid (outermost cell value {0:e})")]
    NotCompactlySupported(f64),

    #[error("breakpoint r = {0} is not an edge of the grid")]
    MissingBreakpoint(f64),

    #[error("weight condition {condition} fails at r = {radius} (residual {residual:e})")]
    WeightCondition {
        condition: &'static str,
        radius: f64,
        residual: f64,
    },

    #[error("time step {dt:e} required at t = {t} is below the underflow floor")]
    TimeStepUnderflow { dt: f64, t: f64 },

    #[error("negative density {value:e} at r = {radius}, t = {t}")]
    NegativeDensity { value: f64, radius: f64, t: f64 },

    #[error("mass budget mismatch {mismatch:e} (relative) at t = {t}")]
    MassBudget { mismatch: f64, t: f64 },

    #[error("trajectory too short: {0}")]
    TrajectoryTooShort(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("root bracketing failed: {0}")]
    Bracket(String),

    #[error("eigen iteration did not converge (residual {residual:e} after {iterations} iterations)")]
    NoConvergence { residual: f64, iterations: usize },

    #[error("not enough points for a fit ({0})")]
    InsufficientData(usize),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
