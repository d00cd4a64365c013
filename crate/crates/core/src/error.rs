use std::path::PathBuf;

/// Errors surfaced by the library. CLI exit codes are derived from
/// [`Error::is_usage`].
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no self-consistent gap-ratio branch (candidates: {low_branch:.6} µΩ·cm at 1.76, {high_branch:.6} µΩ·cm at 2.1)")]
    AmbiguousBranch { low_branch: f64, high_branch: f64 },

    #[error("{source_name}: row {row}, column `{column}`: {message}")]
    Table {
        source_name: String,
        row: usize,
        column: String,
        message: String,
    },

    #[error("parse error in {source_name}: {message}")]
    Parse { source_name: String, message: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no resonance found: {0}")]
    NoResonance(String),

    #[error("more than two resonance candidates at {0:?} Hz")]
    AmbiguousResonances(Vec<f64>),

    #[error("fit did not converge after {iterations} iterations: {message}")]
    NonConvergence { iterations: usize, message: String },

    #[error("trace at {power_dbm} dBm: {source}")]
    AtPower {
        power_dbm: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("stale input {path}: digest {actual} does not match manifest {expected}")]
    StaleInput {
        path: PathBuf,
        expected: String,
        actual: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Validation and parse failures, as opposed to runtime or fit failures.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_) | Error::Table { .. } | Error::Parse { .. }
        )
    }

    /// Short machine-readable tag used in error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::AmbiguousBranch { .. } => "ambiguous_branch",
            Error::Table { .. } => "table",
            Error::Parse { .. } => "parse",
            Error::InsufficientData(_) => "insufficient_data",
            Error::NoResonance(_) => "no_resonance",
            Error::AmbiguousResonances(_) => "ambiguous_resonances",
            Error::NonConvergence { .. } => "non_convergence",
            Error::AtPower { .. } => "at_power",
            Error::StaleInput { .. } => "stale_input",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
