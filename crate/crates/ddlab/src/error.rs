use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Rejected input: bad grid, empty method list, malformed flag, ...
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A matrix expected to be symmetric positive definite was not.
    #[error("matrix not symmetric positive definite: {0}")]
    NotSpd(String),

    /// The symmetric eigensolver did not converge.
    #[error("symmetric eigensolver did not converge")]
    EigNonConvergence,

    /// A numerical consistency check failed at run time.
    #[error("numerical check failed: {0}")]
    Numerical(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
