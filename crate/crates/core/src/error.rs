use thiserror::Error;

/// Errors produced by the tensor regression library.
#[derive(Debug, Error)]
pub enum Error {
    /// Shapes, ranks or indices that do not fit together.
    #[error("structural error: {0}")]
    Structural(String),

    /// A parameter outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical failure (non-SPD matrix, overflow, non-finite draw).
    #[error("numerical error: {0}")]
    Numerical(String),

    /// Malformed input file content.
    #[error("input error at byte {offset}: {message}")]
    Input { offset: usize, message: String },

    /// Canonical margins cannot be formed for these factors.
    #[error("canonicalization unavailable: {0}")]
    CanonicalizationUnavailable(String),

    /// Simulation scenario could not be realized.
    #[error("generation error: {0}")]
    Generation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn structural(msg: impl Into<String>) -> Error {
    Error::Structural(msg.into())
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn numerical(msg: impl Into<String>) -> Error {
    Error::Numerical(msg.into())
}
