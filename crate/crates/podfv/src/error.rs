use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Crate-wide error type. The CLI maps variants onto stable exit codes, so
/// the distinction between e.g. [`Error::Dimension`] and [`Error::Solver`]
/// is part of the external contract.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh: {0}")]
    Mesh(String),
    #[error("field: {0}")]
    Field(String),
    #[error("dimension: {0}")]
    Dimension(String),
    #[error("solver: {0}")]
    Solver(String),
    #[error("pod: {0}")]
    Pod(String),
    #[error("rom: {0}")]
    Rom(String),
    #[error("eval: {0}")]
    Eval(String),
    #[error("stale artifact: {0}")]
    Stale(String),
    #[error("format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
