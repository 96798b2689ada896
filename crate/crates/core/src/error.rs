use thiserror::Error;

/// Errors raised across the crate. Variants mirror the failure classes of the
/// individual operations so callers (and the CLI exit-code mapping) can tell a
/// bad argument from a numerical breakdown.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("unsupported variant: {0}")]
    Unsupported(String),
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("size error: {0}")]
    Size(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("inconsistent input: {0}")]
    Inconsistent(String),
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unpaired non-real root: {0}")]
    Asymmetry(String),
    #[error("singular configuration: {0}")]
    Singular(String),
}

pub type Result<T> = std::result::Result<T, Error>;
