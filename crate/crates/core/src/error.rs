//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or out-of-contract input data.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A spectral window does not overlap the data grid.
    #[error("empty window: {0}")]
    EmptyWindow(String),

    /// A nonlinear fit failed to converge or the data are degenerate.
    /// Carries the last iterate so callers can inspect how far the fit got.
    #[error("fit failure: {message}")]
    FitFailure {
        message: String,
        last_params: Vec<f64>,
    },

    /// Grid registration could not be performed (e.g. degenerate centers).
    #[error("registration failure: {0}")]
    RegistrationFailure(String),

    /// A configuration file violated the schema. `key` is the dotted path of
    /// the offending field.
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("format error in {path}: {message}")]
    Format { path: String, message: String },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn fit(msg: impl Into<String>, last_params: &[f64]) -> Self {
        Error::FitFailure {
            message: msg.into(),
            last_params: last_params.to_vec(),
        }
    }

    pub fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: msg.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: msg.into(),
        }
    }

    /// Process exit code used by the CLI: 2 validation, 3 numerical, 4 io.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) | Error::EmptyWindow(_) | Error::Config { .. } => 2,
            Error::FitFailure { .. } | Error::RegistrationFailure(_) => 3,
            Error::Io { .. } | Error::Format { .. } => 4,
        }
    }
}
