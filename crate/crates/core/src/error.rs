use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} is outside its domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("root bracket could not be established: {0}")]
    NoBracket(String),

    #[error("solver did not converge: {0}")]
    NoConvergence(String),

    #[error("matrix is numerically singular (min eigenvalue {min_eigen:e}, max {max_eigen:e})")]
    Singular { min_eigen: f64, max_eigen: f64 },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("empty bin at level tau = {tau}, bin index {bin}")]
    EmptyBin { tau: u32, bin: usize },

    #[error("likelihood is flat: {0}")]
    FlatLikelihood(String),

    #[error("singular point lists differ between source and target: {0}")]
    SpecMismatch(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("degenerate design: {0}")]
    Degenerate(String),

    #[error("config line {line}: {msg}")]
    ConfigParse { line: usize, msg: String },

    #[error("config key `{key}`: {msg}")]
    ConfigKey { key: String, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors caused by user-supplied configuration or input files.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::ConfigParse { .. }
                | Error::ConfigKey { .. }
                | Error::InvalidParameter { .. }
                | Error::Csv { .. }
                | Error::Io { .. }
        )
    }
}
