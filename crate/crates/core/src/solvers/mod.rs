//! Sparse recovery from `y = Phi x + e`.
//!
//! * [`solve_bpdn`]: `min ||x||_1` subject to `||Phi x - y||_2 <= eps`, by
//!   exact homotopy on the penalty of `1/2 ||Phi x - y||^2 + lambda ||x||_1`.
//! * [`solve_iht`]: iterative hard thresholding.
//! * [`solve_oracle_ls`]: least squares on a known support.
//! * [`reference_bpdn`]: slow dense interior-point solver kept as an
//!   independent check on `solve_bpdn`.

mod bpdn;
mod iht;
mod oracle;
mod reference;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::operators::LinearOperator;

pub use bpdn::solve_bpdn;
pub use iht::solve_iht;
pub use oracle::solve_oracle_ls;
pub use reference::{reference_bpdn, REFERENCE_MAX_COLUMNS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Bpdn,
    Iht,
    #[serde(rename = "oracle")]
    OracleLs,
}

impl Method {
    /// Name used in files and on the command line.
    pub fn name(self) -> &'static str {
        match self {
            Method::Bpdn => "bpdn",
            Method::Iht => "iht",
            Method::OracleLs => "oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepMode {
    Fixed,
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Noise budget `eps` of the quadratic constraint.
    pub epsilon: f64,
    pub max_iter: usize,
    pub feas_tol: f64,
    pub opt_tol: f64,
    /// Sparsity kept by hard thresholding.
    pub s_target: usize,
    pub step_mode: StepMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.0,
            max_iter: 5000,
            feas_tol: 1e-6,
            opt_tol: 1e-8,
            s_target: 1,
            step_mode: StepMode::Adaptive,
        }
    }
}

impl SolverConfig {
    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_sparsity(mut self, s: usize) -> Self {
        self.s_target = s;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::InvalidParameter("epsilon must be finite and >= 0"));
        }
        if self.feas_tol.is_nan() || self.opt_tol.is_nan() || self.feas_tol <= 0.0 || self.opt_tol <= 0.0 {
            return Err(Error::InvalidParameter("tolerances must be > 0"));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be >= 1"));
        }
        Ok(())
    }

    /// Largest residual accepted as feasible: `eps (1 + feas_tol)`, or
    /// `feas_tol ||y||` when `eps = 0`.
    pub fn feasibility_bound(&self, y_norm: f64) -> f64 {
        if self.epsilon > 0.0 {
            self.epsilon * (1.0 + self.feas_tol)
        } else {
            self.feas_tol * y_norm
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub x_hat: Vec<f64>,
    pub residual_norm: f64,
    pub l1_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    pub method: Method,
    /// Set by the oracle solver when the restricted system lost rank.
    #[serde(default)]
    pub rank_deficient: bool,
}

impl RecoveryResult {
    fn finish<O: LinearOperator + ?Sized>(
        op: &O,
        y: &[f64],
        x_hat: Vec<f64>,
        iterations: usize,
        converged: bool,
        method: Method,
    ) -> Result<Self> {
        let residual_norm = residual_norm(op, &x_hat, y)?;
        Ok(Self {
            l1_norm: l1(&x_hat),
            x_hat,
            residual_norm,
            iterations,
            converged,
            method,
            rank_deficient: false,
        })
    }
}

pub(crate) fn norm2(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

pub(crate) fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn residual<O: LinearOperator + ?Sized>(op: &O, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    let mut r = op.apply(x)?;
    for (ri, yi) in r.iter_mut().zip(y) {
        *ri = yi - *ri;
    }
    Ok(r)
}

pub fn residual_norm<O: LinearOperator + ?Sized>(op: &O, x: &[f64], y: &[f64]) -> Result<f64> {
    Ok(norm2(&residual(op, x, y)?))
}

pub(crate) fn check_problem<O: LinearOperator + ?Sized>(op: &O, y: &[f64], cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    check_len(op.output_len(), y.len())?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// Relative l2 error `||x - truth|| / ||truth||`, or the absolute error
/// when `truth` is zero.
pub fn relative_error(x: &[f64], truth: &[f64]) -> f64 {
    let diff: Vec<f64> = x.iter().zip(truth).map(|(a, b)| a - b).collect();
    let scale = norm2(truth);
    let err = norm2(&diff);
    if scale > 0.0 {
        err / scale
    } else {
        err
    }
}
