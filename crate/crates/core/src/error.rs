use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Which plug-in component made a confidence interval degenerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DegenerateCause {
    NonPositiveGamma,
    NonPositiveMHat,
    EmptyBall,
}

impl fmt::Display for DegenerateCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DegenerateCause::NonPositiveGamma => write!(f, "gamma1_hat <= 0"),
            DegenerateCause::NonPositiveMHat => write!(f, "m_hat <= 0"),
            DegenerateCause::EmptyBall => write!(f, "ball probability is 0"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("no observations supplied")]
    EmptyData,

    #[error("invalid observation at index {index}: {reason}")]
    InvalidObservation { index: usize, reason: String },

    #[error("survival floor must lie in (0, 1), got {0}")]
    InvalidFloor(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no local data at x = {x:?} with bandwidth {bandwidth}")]
    NoLocalData { x: Vec<f64>, bandwidth: f64 },

    #[error("score does not change sign on [{lo}, {hi}] (score sign {sign})")]
    NoSignChange { lo: f64, hi: f64, sign: i8 },

    #[error("root finder exceeded {0} iterations")]
    MaxIterExceeded(usize),

    #[error("degenerate confidence interval at x = {x:?}: {cause}")]
    DegenerateCi { x: Vec<f64>, cause: DegenerateCause },

    #[error("censoring rate {target} unreachable (achievable range [{min}, {max}])")]
    UnreachableCr { target: f64, min: f64, max: f64 },

    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: u64, reason: String },

    #[error("line {line}: delta must be 0 or 1, got {value:?}")]
    BadDelta { line: u64, value: String },

    #[error("file {0} contains no data rows")]
    EmptyFile(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable name of the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyData => "EmptyData",
            Error::InvalidObservation { .. } => "InvalidObservation",
            Error::InvalidFloor(_) => "InvalidFloor",
            Error::Dimension { .. } => "DimensionError",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::NoLocalData { .. } => "NoLocalData",
            Error::NoSignChange { .. } => "NoSignChange",
            Error::MaxIterExceeded(_) => "MaxIterExceeded",
            Error::DegenerateCi { .. } => "DegenerateCI",
            Error::UnreachableCr { .. } => "UnreachableCR",
            Error::MalformedRow { .. } => "MalformedRow",
            Error::BadDelta { .. } => "BadDelta",
            Error::EmptyFile(_) => "EmptyFile",
            Error::Io(_) => "IoError",
            Error::Csv(_) => "CsvError",
            Error::Json(_) => "JsonError",
        }
    }

    /// True for failures of the estimation procedure itself, as opposed to bad
    /// input or configuration.
    pub fn is_estimation_failure(&self) -> bool {
        matches!(
            self,
            Error::NoLocalData { .. }
                | Error::NoSignChange { .. }
                | Error::MaxIterExceeded(_)
                | Error::DegenerateCi { .. }
        )
    }

    /// Evaluation point attached to the error, if any.
    pub fn point(&self) -> Option<&[f64]> {
        match self {
            Error::NoLocalData { x, .. } | Error::DegenerateCi { x, .. } => Some(x),
            _ => None,
        }
    }
}
