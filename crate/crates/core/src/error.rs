use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A problem dimension is zero or violates `m >= n`.
    #[error("invalid dimensions: {0}")]
    InvalidDims(&'static str),

    #[error("dimension mismatch: expected length {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A dense construction would exceed the configured element budget.
    #[error("dense construction needs {elements} elements, limit is {limit}")]
    DenseLimit { elements: u64, limit: u64 },

    /// Exhaustive enumeration would exceed the configured work budget.
    #[error("enumeration needs ~{required} operations, budget is {limit}")]
    Budget { required: u64, limit: u64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),

    #[error("input contains non-finite values")]
    NonFinite,

    #[error("constraint set is empty: least-squares residual {min_residual} exceeds epsilon {epsilon}")]
    Infeasible { min_residual: f64, epsilon: f64 },
}

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
