use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of a multichannel problem.
///
/// `n` is the channel length, `m` the probe length, `p` the number of
/// simultaneously active sources and `r` the number of receivers. Every
/// receiver is an independent instance of the same `m x np` system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProblemDims {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    #[serde(default = "one")]
    pub r: usize,
}

fn one() -> usize {
    1
}

impl ProblemDims {
    pub fn new(n: usize, m: usize, p: usize) -> Result<Self> {
        Self::with_receivers(n, m, p, 1)
    }

    pub fn with_receivers(n: usize, m: usize, p: usize, r: usize) -> Result<Self> {
        let dims = Self { n, m, p, r };
        dims.validate()?;
        Ok(dims)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 || self.p == 0 || self.r == 0 {
            return Err(Error::InvalidDims("all of n, m, p, r must be >= 1"));
        }
        if self.m < self.n {
            return Err(Error::InvalidDims("m must be ≥ n"));
        }
        Ok(())
    }

    /// Length of the concatenated channel vector, `n * p`.
    pub fn input_len(&self) -> usize {
        self.n * self.p
    }

    /// Number of linear-convolution observations, `m + n - 1`.
    pub fn linear_len(&self) -> usize {
        self.m + self.n - 1
    }
}
