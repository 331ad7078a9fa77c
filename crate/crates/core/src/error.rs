use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A configuration field violates its invariant.
    #[error("invalid `{field}`: {reason}")]
    Config { field: String, reason: String },

    /// An argument is outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A covariance block lost rank between the two sides of a mutual-information ratio.
    #[error("numerically degenerate covariance block (eigenvalue {eigenvalue:e})")]
    NumericalDegeneracy { eigenvalue: f64 },

    #[error("{what} exceeds the supported limit of {limit}")]
    Capability { what: String, limit: usize },

    /// An amplification factor exceeds the relay power constraint.
    #[error("relay {relay}: |beta|^2 = {beta_sq:e} exceeds the power limit {limit:e}")]
    Constraint {
        relay: usize,
        beta_sq: f64,
        limit: f64,
    },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("I/O error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
