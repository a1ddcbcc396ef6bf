use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("matrix is not Hermitian within tolerance {tol}")]
    NotHermitian { tol: f64 },

    #[error("value out of domain: {0}")]
    OutOfDomain(String),

    /// A relay transmit power exceeds its harvested-energy budget.
    #[error("relay {relay}: power {power} exceeds budget {budget}")]
    BudgetViolation {
        relay: usize,
        power: f64,
        budget: f64,
    },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
