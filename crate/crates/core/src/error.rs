use chrono::NaiveDate;
use thiserror::Error;

use crate::milpsolve::MipResult;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the library reports. Variants are grouped by the CLI exit
/// code they map to (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    // data errors (exit 2)
    #[error("gap in {entity}: {detail}")]
    Gap { entity: String, detail: String },
    #[error("unit error: {0}")]
    Unit(String),
    #[error("parse error at line {line}: {detail}")]
    Parse { line: usize, detail: String },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("insufficient history: {0}")]
    InsufficientHistory(String),
    #[error("no usable training data: {0}")]
    NoData(String),
    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("empty scenario set")]
    EmptyScenario,
    #[error("model mismatch: {0}")]
    ModelMismatch(String),
    #[error("covariance is not positive semi-definite after shrinkage: {0}")]
    SingularCov(String),
    #[error("look-ahead: {0}")]
    LookAhead(String),
    #[error("days processed out of order: {got} after {last}")]
    OutOfOrder { last: NaiveDate, got: NaiveDate },
    #[error("season incomplete: {0}")]
    IncompleteSeason(String),
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("infeasible schedule: {0}")]
    InfeasibleSchedule(String),

    // solver errors (exit 3)
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("iteration limit reached after {nodes} nodes")]
    IterationLimit {
        nodes: usize,
        best: Option<Box<MipResult>>,
    },
    #[error("problem is infeasible: {0}")]
    Infeasible(String),

    // configuration errors (exit 4)
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid synthetic world spec: {0}")]
    Spec(String),
    #[error("infeasible bounds: {0}")]
    InfeasibleBounds(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{date}: {source}")]
    Day {
        date: NaiveDate,
        #[source]
        source: Box<Error>,
    },
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn gap(entity: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Gap {
            entity: entity.into(),
            detail: detail.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Wraps the error with the pipeline stage that produced it.
    pub fn at(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// Wraps the error with the day being processed.
    pub fn at_day(self, date: NaiveDate) -> Self {
        Error::Day {
            date,
            source: Box::new(self),
        }
    }

    /// Process exit code: 2 data error, 3 solver error, 4 config error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Stage { source, .. } | Error::Day { source, .. } => source.exit_code(),
            Error::Numerical(_) | Error::IterationLimit { .. } | Error::Infeasible(_) => 3,
            Error::Config(_) | Error::Spec(_) | Error::InfeasibleBounds(_) => 4,
            _ => 2,
        }
    }

    /// The innermost error, with stage annotations stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } | Error::Day { source, .. } => source.root(),
            e => e,
        }
    }
}
