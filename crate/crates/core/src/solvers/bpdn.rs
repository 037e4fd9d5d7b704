//! Basis pursuit denoising by penalty continuation.
//!
//! The solution of `min ||x||_1 s.t. ||Phi x - y|| <= eps` is the lasso
//! solution `x(lambda)` at the penalty where the residual norm equals `eps`.
//! `x(lambda)` is piecewise linear in `lambda`, so we follow it exactly from
//! `lambda = ||Phi^T y||_inf` (where `x = 0`) downwards, one breakpoint per
//! iteration, and stop inside the segment where the residual crosses `eps`
//! by solving a scalar quadratic. With `eps = 0` the path is followed down to
//! `lambda = 0`, which yields the basis pursuit solution.
//!
//! Only the columns of the active set are ever materialized.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use super::{check_problem, dot, norm2, residual, Method, RecoveryResult, SolverConfig};
use crate::error::Result;
use crate::operators::LinearOperator;

struct ColumnCache<'o, O: ?Sized> {
    op: &'o O,
    cols: Vec<Option<Vec<f64>>>,
}

impl<'o, O: LinearOperator + ?Sized> ColumnCache<'o, O> {
    fn new(op: &'o O) -> Self {
        Self {
            op,
            cols: vec![None; op.input_len()],
        }
    }

    fn ensure(&mut self, i: usize) -> Result<()> {
        if self.cols[i].is_none() {
            self.cols[i] = Some(self.op.column(i)?);
        }
        Ok(())
    }

    fn col(&self, i: usize) -> &[f64] {
        self.cols[i].as_deref().unwrap_or(&[])
    }
}

enum Event {
    Add(usize),
    Remove(usize),
    End,
}

pub fn solve_bpdn<O: LinearOperator + ?Sized>(
    op: &O,
    y: &[f64],
    cfg: &SolverConfig,
) -> Result<RecoveryResult> {
    check_problem(op, y, cfg)?;
    let n = op.input_len();
    let eps = cfg.epsilon;
    let y_norm = norm2(y);
    let finish = |x: Vec<f64>, iterations: usize| -> Result<RecoveryResult> {
        let mut out = RecoveryResult::finish(op, y, x, iterations, false, Method::Bpdn)?;
        out.converged = out.residual_norm <= cfg.feasibility_bound(y_norm);
        Ok(out)
    };
    if y_norm <= eps {
        return finish(vec![0.0; n], 0);
    }

    let mut x = vec![0.0; n];
    let mut r = y.to_vec();
    let mut corr = op.adjoint(&r)?;
    let (first, lambda0) = argmax_abs(&corr, |_| true);
    let mut lambda = lambda0;
    if lambda == 0.0 {
        // y is orthogonal to the range; nothing reduces the residual
        return finish(x, 0);
    }

    let mut cache = ColumnCache::new(op);
    let mut active: Vec<usize> = vec![first];
    let mut signs: Vec<f64> = vec![corr[first].signum()];
    let mut in_active = vec![false; n];
    in_active[first] = true;
    let mut last_removed: Option<usize> = None;

    for iter in 1..=cfg.max_iter {
        let k = active.len();
        for &i in &active {
            cache.ensure(i)?;
        }
        let mut gram = DMatrix::zeros(k, k);
        for a in 0..k {
            for b in 0..=a {
                let v = dot(cache.col(active[a]), cache.col(active[b]));
                gram[(a, b)] = v;
                gram[(b, a)] = v;
            }
        }
        let chol = match gram.cholesky() {
            Some(c) if well_conditioned(c.l_dirty()) => c,
            // active columns became dependent; the current point is the
            // best the path can offer
            _ => return finish(x, iter),
        };
        let dir = chol.solve(&DVector::from_column_slice(&signs));

        // v = Phi_G d, and its correlation with every column
        let mut v = vec![0.0; op.output_len()];
        for (a, &i) in active.iter().enumerate() {
            for (vt, ct) in v.iter_mut().zip(cache.col(i)) {
                *vt += dir[a] * ct;
            }
        }
        let av = op.adjoint(&v)?;

        let tiny = 1e-14 * lambda0;
        let mut step = lambda;
        let mut event = Event::End;
        let full = k >= op.output_len();
        for i in 0..n {
            if full || in_active[i] || Some(i) == last_removed {
                continue;
            }
            for cand in [(lambda - corr[i]) / (1.0 - av[i]), (lambda + corr[i]) / (1.0 + av[i])] {
                if cand > tiny && cand < step {
                    step = cand;
                    event = Event::Add(i);
                }
            }
        }
        for (a, &i) in active.iter().enumerate() {
            if dir[a] != 0.0 {
                let cand = -x[i] / dir[a];
                if cand > tiny && cand < step {
                    step = cand;
                    event = Event::Remove(i);
                }
            }
        }

        // breakpoints this close to lambda = 0 are roundoff
        if lambda - step <= 1e-12 * lambda0 {
            step = lambda;
            event = Event::End;
        }

        // residual along the segment: ||r - g v||^2, decreasing on [0, lambda]
        if eps > 0.0 {
            let rr = dot(&r, &r);
            let rv = dot(&r, &v);
            let vv = dot(&v, &v);
            let target = eps * eps;
            let disc = rv * rv - vv * (rr - target);
            if vv > 0.0 && disc >= 0.0 {
                let root = (rr - target) / (rv + libm::sqrt(disc));
                if root <= step {
                    for (a, &i) in active.iter().enumerate() {
                        x[i] += root * dir[a];
                    }
                    return finish(x, iter);
                }
            }
        }

        for (a, &i) in active.iter().enumerate() {
            x[i] += step * dir[a];
        }
        r = residual(op, &x, y)?;
        corr = op.adjoint(&r)?;
        lambda -= step;

        match event {
            Event::End => return finish(x, iter),
            Event::Add(i) => {
                active.push(i);
                signs.push(corr[i].signum());
                in_active[i] = true;
                last_removed = None;
            }
            Event::Remove(i) => {
                let pos = active.iter().position(|&j| j == i).unwrap_or(0);
                active.swap_remove(pos);
                signs.swap_remove(pos);
                in_active[i] = false;
                x[i] = 0.0;
                last_removed = Some(i);
            }
        }
        if lambda <= tiny {
            return finish(x, iter);
        }
    }
    finish(x, cfg.max_iter)
}

/// Rejects Cholesky factors whose pivots span more than 1e6 (Gram condition 1e12).
fn well_conditioned(l: &DMatrix<f64>) -> bool {
    let diag = l.diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0f64), |(lo, hi), &d| (lo.min(d.abs()), hi.max(d.abs())));
    lo > 1e-6 * hi
}

/// Index of the largest `|v_i|` among admissible entries (lowest index on ties).
fn argmax_abs(v: &[f64], admissible: impl Fn(usize) -> bool) -> (usize, f64) {
    let mut best = (0, 0.0);
    for (i, &x) in v.iter().enumerate() {
        if admissible(i) && x.abs() > best.1 {
            best = (i, x.abs());
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::{DenseOperator, IdentityOperator};

    #[test]
    fn zero_is_returned_inside_the_noise_ball() {
        let op = IdentityOperator(3);
        let cfg = SolverConfig::default().with_epsilon(1.0);
        let out = solve_bpdn(&op, &[0.3, -0.4, 0.5], &cfg).unwrap();
        assert_eq!(out.x_hat, vec![0.0; 3]);
        assert!(out.converged);
        assert_eq!(out.iterations, 0);
    }

    #[test]
    fn identity_noiseless_returns_data() {
        let op = IdentityOperator(4);
        let y = [1.5, -0.25, 0.0, 3.0];
        let out = solve_bpdn(&op, &y, &SolverConfig::default()).unwrap();
        for (a, b) in out.x_hat.iter().zip(&y) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(out.converged);
    }

    #[test]
    fn identity_with_noise_is_soft_threshold() {
        // min ||x||_1 s.t. ||x - y|| <= eps on the identity shrinks every
        // entry by a common amount t with sum(min(|y|,t)^2) = eps^2
        let op = IdentityOperator(3);
        let y = [3.0, -1.0, 0.5];
        let eps = 1.0;
        let out = solve_bpdn(&op, &y, &SolverConfig::default().with_epsilon(eps)).unwrap();
        // t = 0.5 + ... solve: 0.25 + 2 t^2 = 1 with t in [0.5, 1] -> t = sqrt(0.375)
        let t = libm::sqrt(0.375);
        let want = [3.0 - t, -(1.0 - t), 0.0];
        for (a, b) in out.x_hat.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12, "{:?}", out.x_hat);
        }
        assert!((out.residual_norm - eps).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_data_gives_zero() {
        let op = DenseOperator(DMatrix::from_row_slice(2, 1, &[1.0, 0.0]));
        let out = solve_bpdn(&op, &[0.0, 1.0], &SolverConfig::default()).unwrap();
        assert_eq!(out.x_hat, vec![0.0]);
        assert!(!out.converged);
    }

    #[test]
    fn rejects_bad_input() {
        let op = IdentityOperator(2);
        assert!(solve_bpdn(&op, &[1.0, f64::NAN], &SolverConfig::default()).is_err());
        assert!(solve_bpdn(&op, &[1.0], &SolverConfig::default()).is_err());
        let cfg = SolverConfig::default().with_epsilon(-0.1);
        assert!(solve_bpdn(&op, &[1.0, 2.0], &cfg).is_err());
    }
}
