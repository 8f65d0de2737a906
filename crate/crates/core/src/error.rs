use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    /// A parameter vector violates `alpha, beta, p, q, k > 0`, `k*p < 1` or `k*q > 1`.
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("graph {index} of the collection is disconnected")]
    Disconnected { index: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid switching schedule: {0}")]
    InvalidSchedule(String),

    #[error("integration did not reach the origin before t = {limit}")]
    NonTermination { limit: f64 },

    #[error("state became non-finite at t = {t}")]
    BlowUp { t: f64 },
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
