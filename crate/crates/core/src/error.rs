//! Error type shared by every module.

use thiserror::Error;

/// Failure modes grouped the way the command line reports them.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input data.
    #[error("data error: {0}")]
    Data(String),
    /// Array or matrix dimensions that do not fit together.
    #[error("shape error: {0}")]
    Shape(String),
    /// A requested feature the chosen configuration cannot provide.
    #[error("capability error: {0}")]
    Capability(String),
    /// An iterative solve that did not converge or blew up.
    #[error("solver error: {0}")]
    Solver(String),
    /// Linear system without a unique solution.
    #[error("rank error: {0}")]
    Rank(String),
    /// Invalid configuration text or value.
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
