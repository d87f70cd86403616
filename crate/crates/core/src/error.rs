use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("lag {lag} beyond stored autocovariance range (max_lag = {max_lag})")]
    LagOutOfRange { lag: usize, max_lag: usize },

    /// Circulant embedding produced an eigenvalue below the clipping tolerance.
    #[error("non-embeddable autocovariance: circulant eigenvalue {value:e} at index {index} (tolerance {tolerance:e})")]
    Spectral { index: usize, value: f64, tolerance: f64 },

    #[error("covariance matrix is not nonnegative-definite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("numerical failure: {0}")]
    Numeric(String),

    /// No conditioning window fell in the extreme set.
    #[error("insufficient exceedances: numerator {numerator}, denominator {denominator}")]
    InsufficientExceedances { numerator: usize, denominator: usize },

    #[error("degenerate extreme set: conditioning expectation estimate {0:e} is not positive")]
    DegenerateSet(f64),

    #[error("unsupported: {0}")]
    Unimplemented(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable category used in CLI error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::LagOutOfRange { .. } => "lag_out_of_range",
            Error::Spectral { .. } => "spectral",
            Error::NotPositiveDefinite { .. } => "not_positive_definite",
            Error::Domain(_) => "domain",
            Error::Config(_) => "config",
            Error::Shape { .. } => "shape",
            Error::Numeric(_) => "numeric",
            Error::InsufficientExceedances { .. } => "insufficient_exceedances",
            Error::DegenerateSet(_) => "degenerate_set",
            Error::Unimplemented(_) => "unimplemented",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
        }
    }

    /// Process exit code: 2 input, 3 config, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::Parse { .. } => 2,
            Error::LagOutOfRange { .. }
            | Error::Domain(_)
            | Error::Config(_)
            | Error::Shape { .. }
            | Error::Unimplemented(_) => 3,
            Error::Spectral { .. }
            | Error::NotPositiveDefinite { .. }
            | Error::Numeric(_)
            | Error::InsufficientExceedances { .. }
            | Error::DegenerateSet(_) => 4,
        }
    }
}
