use thiserror::Error;

/// Errors produced by the calibration library.
#[derive(Debug, Error)]
pub enum Error {
    /// An input is outside the domain of a model formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration file or value could not be accepted.
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    /// The requested parameters cannot be estimated from the given observations.
    #[error("non-identifiable: {0}")]
    NonIdentifiable(String),

    /// Observation and configuration disagree on a vector length.
    #[error("dimension mismatch: expected {expected} samples, found {found}")]
    Dimension { expected: usize, found: usize },

    /// Observation or estimator setup inconsistent with the model.
    #[error("model error: {0}")]
    Model(String),

    /// A numerical step became degenerate.
    #[error("numeric degeneracy: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Coarse error family, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Model,
    Numeric,
    Io,
}

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config { .. } | Error::Json(_) => ErrorCategory::Config,
            Error::Domain(_) | Error::NonIdentifiable(_) | Error::Dimension { .. } | Error::Model(_) => {
                ErrorCategory::Model
            }
            Error::Numeric(_) => ErrorCategory::Numeric,
            Error::Io(_) | Error::Csv(_) => ErrorCategory::Io,
        }
    }

    /// Process exit code: 2 config, 3 model / non-identifiable, 4 numeric, 1 I/O.
    pub fn exit_code(&self) -> i32 {
        match self.category() {
            ErrorCategory::Config => 2,
            ErrorCategory::Model => 3,
            ErrorCategory::Numeric => 4,
            ErrorCategory::Io => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
