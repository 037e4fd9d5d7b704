use alloc::vec;
use alloc::vec::Vec;

use super::{check_problem, dot, norm2, residual, Method, RecoveryResult, SolverConfig, StepMode};
use crate::channels::largest_indices;
use crate::error::{Error, Result};
use crate::operators::LinearOperator;

/// Keeps the `s` largest magnitudes of `v` (lowest index wins ties).
pub fn hard_threshold(v: &[f64], s: usize) -> Vec<f64> {
    crate::channels::best_s_term(v, s)
}

/// `||Phi||^2` by power iteration on `Phi^T Phi` from a fixed start.
fn squared_norm_estimate<O: LinearOperator + ?Sized>(op: &O) -> Result<f64> {
    let n = op.input_len();
    let mut v = vec![1.0 / libm::sqrt(n as f64); n];
    let mut est = 0.0;
    for _ in 0..200 {
        let w = op.adjoint(&op.apply(&v)?)?;
        let norm = norm2(&w);
        if norm == 0.0 {
            return Ok(0.0);
        }
        let done = (norm - est).abs() <= 1e-10 * norm;
        est = norm;
        v = w.into_iter().map(|x| x / norm).collect();
        if done {
            break;
        }
    }
    Ok(est)
}

/// Iterative hard thresholding, `x <- H_s(x + mu Phi^T (y - Phi x))`.
///
/// `StepMode::Fixed` uses `mu = 1 / (1.01 ||Phi||^2)`. `StepMode::Adaptive`
/// starts from the normalized step `||g_G||^2 / ||Phi g_G||^2` on the current
/// support `G` and halves it until the residual does not increase.
pub fn solve_iht<O: LinearOperator + ?Sized>(
    op: &O,
    y: &[f64],
    cfg: &SolverConfig,
) -> Result<RecoveryResult> {
    check_problem(op, y, cfg)?;
    let s = cfg.s_target;
    if s == 0 {
        return Err(Error::InvalidParameter("s_target must be >= 1"));
    }
    let n = op.input_len();
    let fixed_step = match cfg.step_mode {
        StepMode::Fixed => {
            let l = squared_norm_estimate(op)?;
            if l > 0.0 {
                1.0 / (1.01 * l)
            } else {
                1.0
            }
        }
        StepMode::Adaptive => 0.0,
    };

    let mut x = vec![0.0; n];
    let mut r = y.to_vec();
    let mut r_norm = norm2(&r);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        iterations += 1;
        let g = op.adjoint(&r)?;
        let (x_new, r_new) = match cfg.step_mode {
            StepMode::Fixed => {
                let x_new = step(&x, &g, fixed_step, s);
                let r_new = residual(op, &x_new, y)?;
                (x_new, r_new)
            }
            StepMode::Adaptive => adaptive_step(op, y, &x, &g, r_norm, s)?,
        };
        let change = norm2(&x_new.iter().zip(&x).map(|(a, b)| a - b).collect::<Vec<_>>());
        let scale = norm2(&x);
        x = x_new;
        r = r_new;
        r_norm = norm2(&r);
        if change <= cfg.opt_tol * scale {
            converged = true;
            break;
        }
    }
    RecoveryResult::finish(op, y, x, iterations, converged, Method::Iht)
}

fn step(x: &[f64], g: &[f64], mu: f64, s: usize) -> Vec<f64> {
    let moved: Vec<f64> = x.iter().zip(g).map(|(a, b)| a + mu * b).collect();
    hard_threshold(&moved, s)
}

fn adaptive_step<O: LinearOperator + ?Sized>(
    op: &O,
    y: &[f64],
    x: &[f64],
    g: &[f64],
    r_norm: f64,
    s: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let support: Vec<usize> = if x.iter().all(|&v| v == 0.0) {
        largest_indices(g, s)
    } else {
        crate::channels::support_of(x)
    };
    let mut g_support = vec![0.0; g.len()];
    for &i in &support {
        g_support[i] = g[i];
    }
    let num = dot(&g_support, &g_support);
    if num == 0.0 {
        return Ok((x.to_vec(), residual(op, x, y)?));
    }
    let phi_g = op.apply(&g_support)?;
    let den = dot(&phi_g, &phi_g);
    let mut mu = if den > 0.0 { num / den } else { 1.0 };
    for _ in 0..60 {
        let cand = step(x, g, mu, s);
        let r = residual(op, &cand, y)?;
        if norm2(&r) <= r_norm {
            return Ok((cand, r));
        }
        mu *= 0.5;
    }
    Ok((x.to_vec(), residual(op, x, y)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{DenseOperator, IdentityOperator};
    use nalgebra::DMatrix;

    #[test]
    fn zero_data_stops_immediately() {
        let op = IdentityOperator(5);
        let cfg = SolverConfig::default().with_sparsity(2);
        let out = solve_iht(&op, &[0.0; 5], &cfg).unwrap();
        assert_eq!(out.x_hat, vec![0.0; 5]);
        assert_eq!(out.iterations, 1);
        assert!(out.converged);
    }

    #[test]
    fn output_is_s_sparse() {
        let op = IdentityOperator(6);
        let y = [1.0, -4.0, 2.0, 0.5, 3.0, -0.1];
        for mode in [StepMode::Fixed, StepMode::Adaptive] {
            let cfg = SolverConfig {
                s_target: 2,
                step_mode: mode,
                ..SolverConfig::default()
            };
            let out = solve_iht(&op, &y, &cfg).unwrap();
            assert_eq!(crate::channels::support_of(&out.x_hat), vec![1, 4]);
            assert!((out.x_hat[1] + 4.0).abs() < 1e-9);
        }
    }

    #[test]
    fn full_sparsity_is_monotone_landweber() {
        let a = DMatrix::from_row_slice(3, 4, &[1.0, 0.5, 0.0, 2.0, 0.0, 1.0, -1.0, 0.3, 0.2, 0.0, 1.0, 1.0]);
        let op = DenseOperator(a);
        let y = [1.0, 2.0, -1.0];
        let mut last = f64::INFINITY;
        for iters in 1..30 {
            let cfg = SolverConfig {
                s_target: 4,
                max_iter: iters,
                ..SolverConfig::default()
            };
            let out = solve_iht(&op, &y, &cfg).unwrap();
            assert!(out.residual_norm <= last + 1e-15);
            last = out.residual_norm;
        }
    }

    #[test]
    fn rejects_zero_sparsity() {
        let op = IdentityOperator(2);
        let cfg = SolverConfig::default().with_sparsity(0);
        assert!(solve_iht(&op, &[1.0, 2.0], &cfg).is_err());
    }
}
