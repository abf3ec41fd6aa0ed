use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A parameter lies outside the domain of the operation (t <= 0, bad index, ...).
    #[error("{0}")]
    Domain(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    /// Parameters violate the largeness hypotheses under which a bound is claimed.
    #[error("{0}")]
    OutOfHypothesis(String),
    #[error("grid is empty after applying the constraint t|x| <= C")]
    EmptyGrid,
    #[error("quadrature did not converge: {0}")]
    NonConvergence(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
