//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("subject `{id}`: {reason}")]
    MalformedHistory { id: String, reason: String },

    #[error("subject `{id}`: status = 1 on a non-final row")]
    EventOnNonFinalRow { id: String },

    #[error("subject `{id}`: missing value in column `{column}`")]
    MissingValue { id: String, column: String },

    #[error("malformed long-format input: {0}")]
    BadFormat(String),

    #[error("dataset has no uncensored event")]
    NoEvents,

    #[error("requested {requested} grid times but only {available} distinct uncensored times are available")]
    TooFewEventTimes { requested: usize, available: usize },

    #[error("empty risk set at t = {t}")]
    EmptyRiskSet { t: f64 },

    #[error("analysis window [0, {s}] is too narrow for bandwidth h = {h} (need s >= 2h)")]
    WindowTooNarrow { s: f64, h: f64 },

    #[error("concordance is undefined on every grid point")]
    NoDefinedGridPoint,

    #[error("covariate dimension mismatch: expected p = {expected}, got p = {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("censoring calibration could not bracket the target rate")]
    CalibrationBracket,

    #[error("cross-validation failed: every fold was skipped")]
    AllFoldsSkipped,

    #[error("unsupported model schema version {found} (this build reads version {supported})")]
    SchemaVersion { found: u32, supported: u32 },

    #[error("model file holds a `{found}` model, expected `{expected}`")]
    WrongModelKind {
        expected: &'static str,
        found: String,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the CLI: 1 usage, 2 data, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_) | Error::SchemaVersion { .. } => 1,
            Error::MalformedHistory { .. }
            | Error::EventOnNonFinalRow { .. }
            | Error::MissingValue { .. }
            | Error::BadFormat(_)
            | Error::NoEvents
            | Error::TooFewEventTimes { .. }
            | Error::DimensionMismatch { .. }
            | Error::WrongModelKind { .. }
            | Error::Csv(_)
            | Error::Io(_)
            | Error::Json(_) => 2,
            Error::EmptyRiskSet { .. }
            | Error::WindowTooNarrow { .. }
            | Error::NoDefinedGridPoint
            | Error::CalibrationBracket
            | Error::AllFoldsSkipped => 3,
        }
    }
}
