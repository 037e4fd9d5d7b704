//! Dense log-barrier interior-point method for
//! `min ||x||_1 s.t. ||Phi x - y||_2 <= eps`.
//!
//! The problem is lifted to `min sum(u)` over `(x, u)` with `-u <= x <= u`.
//! For `eps > 0` the quadratic constraint enters the barrier directly and the
//! iteration starts from the minimum-norm least-squares point. For `eps = 0`
//! the equality `Phi x = y` is eliminated by writing `x = x0 + Z z` with `Z`
//! an orthonormal basis of the null space of `Phi`. Each Newton system is
//! reduced to the `x` block by eliminating `u` in closed form.
//!
//! Shares no code path with the homotopy solver.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};

/// Largest problem the reference solver accepts.
pub const REFERENCE_MAX_COLUMNS: usize = 64;

struct Barrier<'a> {
    phi: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    /// `Some(eps^2)` when the quadratic constraint is active
    eps_sq: Option<f64>,
    x0: DVector<f64>,
    /// parametrization `x = x0 + basis * z`
    basis: DMatrix<f64>,
}

impl Barrier<'_> {
    fn x_of(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.x0 + &self.basis * z
    }

    /// Constraint values, all must be strictly negative.
    fn feasible(&self, x: &DVector<f64>, u: &DVector<f64>) -> Option<f64> {
        let mut log_sum = 0.0;
        for i in 0..x.len() {
            let f1 = x[i] - u[i];
            let f2 = -x[i] - u[i];
            if f1 >= 0.0 || f2 >= 0.0 {
                return None;
            }
            log_sum += libm::log(-f1) + libm::log(-f2);
        }
        if let Some(eps_sq) = self.eps_sq {
            let r = self.phi * x - self.y;
            let fe = 0.5 * (r.norm_squared() - eps_sq);
            if fe >= 0.0 {
                return None;
            }
            log_sum += libm::log(-fe);
        }
        Some(log_sum)
    }

    fn objective(&self, t: f64, x: &DVector<f64>, u: &DVector<f64>) -> Option<f64> {
        self.feasible(x, u).map(|logs| t * u.sum() - logs)
    }

    fn constraint_count(&self) -> usize {
        2 * self.x0.len() + usize::from(self.eps_sq.is_some())
    }

    /// One Newton direction `(dz, du)` and the decrement.
    fn newton(&self, t: f64, z: &DVector<f64>, u: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>, f64)> {
        let x = self.x_of(z);
        let n = x.len();
        let mut gx = DVector::zeros(n);
        let mut gu = DVector::zeros(n);
        let mut s11 = DVector::zeros(n);
        let mut s12 = DVector::zeros(n);
        for i in 0..n {
            let f1 = x[i] - u[i];
            let f2 = -x[i] - u[i];
            gx[i] = 1.0 / (-f1) - 1.0 / (-f2);
            gu[i] = t - 1.0 / (-f1) - 1.0 / (-f2);
            s11[i] = 1.0 / (f1 * f1) + 1.0 / (f2 * f2);
            s12[i] = -1.0 / (f1 * f1) + 1.0 / (f2 * f2);
        }
        let mut hxx = DMatrix::zeros(n, n);
        if let Some(eps_sq) = self.eps_sq {
            let r = self.phi * &x - self.y;
            let fe = 0.5 * (r.norm_squared() - eps_sq);
            let atr = self.phi.transpose() * r;
            gx += &atr / (-fe);
            hxx += self.phi.transpose() * self.phi / (-fe);
            hxx += &atr * atr.transpose() / (fe * fe);
        }
        for i in 0..n {
            hxx[(i, i)] += s11[i] - s12[i] * s12[i] / s11[i];
        }
        let rhs_x = -&gx + s12.component_mul(&gu).component_div(&s11);
        let h = self.basis.transpose() * &hxx * &self.basis;
        let rhs = self.basis.transpose() * rhs_x;
        let dz = match h.clone().cholesky() {
            Some(c) => c.solve(&rhs),
            None => h.lu().solve(&rhs)?,
        };
        let dx = &self.basis * &dz;
        let du = (-&gu - s12.component_mul(&dx)).component_div(&s11);
        // decrement^2 = -grad . step
        let grad_z = self.basis.transpose() * &gx;
        let dec = -(grad_z.dot(&dz) + gu.dot(&du));
        Some((dz, du, dec))
    }
}

/// Slow, dense oracle for `min ||x||_1 s.t. ||Phi x - y||_2 <= eps`.
///
/// Accepts at most [`REFERENCE_MAX_COLUMNS`] unknowns. Returns
/// [`Error::Infeasible`] when no point satisfies the constraint.
pub fn reference_bpdn(phi: &DMatrix<f64>, y: &[f64], eps: f64) -> Result<Vec<f64>> {
    check_len(phi.nrows(), y.len())?;
    let n = phi.ncols();
    if n > REFERENCE_MAX_COLUMNS {
        return Err(Error::DenseLimit {
            elements: n as u64,
            limit: REFERENCE_MAX_COLUMNS as u64,
        });
    }
    if !(eps.is_finite() && eps >= 0.0) {
        return Err(Error::InvalidParameter("epsilon must be finite and >= 0"));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let yv = DVector::from_column_slice(y);
    if yv.norm() <= eps {
        return Ok(vec![0.0; n]);
    }

    // eigen-decomposition of Phi^T Phi gives both the pseudo-inverse and the null space
    let gram = phi.transpose() * phi;
    let eig = gram.symmetric_eigen();
    let top = eig.eigenvalues.amax();
    let cut = top * 1e-12 * n as f64;
    let mut x0 = DVector::zeros(n);
    let aty = phi.transpose() * &yv;
    let mut null_cols = Vec::new();
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(k);
        if lam > cut {
            x0 += v * (v.dot(&aty) / lam);
        } else {
            null_cols.push(v.into_owned());
        }
    }
    let min_residual = (phi * &x0 - &yv).norm();

    let (eps_sq, basis) = if eps > 0.0 {
        if min_residual >= eps {
            return Err(Error::Infeasible {
                min_residual,
                epsilon: eps,
            });
        }
        (Some(eps * eps), DMatrix::identity(n, n))
    } else {
        if min_residual > 1e-9 * yv.norm() {
            return Err(Error::Infeasible {
                min_residual,
                epsilon: eps,
            });
        }
        if null_cols.is_empty() {
            return Ok(x0.iter().copied().collect());
        }
        (None, DMatrix::from_columns(&null_cols))
    };

    let barrier = Barrier {
        phi,
        y: &yv,
        eps_sq,
        x0: x0.clone(),
        basis,
    };
    let mut z = DVector::zeros(barrier.basis.ncols());
    let x_abs_max = x0.amax();
    let mut u = x0.map(|v| 0.95 * v.abs() + 0.10 * x_abs_max);
    if x_abs_max == 0.0 {
        u.fill(1.0);
    }

    let count = barrier.constraint_count() as f64;
    let l1 = x0.lp_norm(1);
    let mut t = if l1 > 0.0 { (count / l1).max(1.0) } else { 1.0 };
    for _outer in 0..60 {
        for _inner in 0..100 {
            let Some((dz, du, dec)) = barrier.newton(t, &z, &u) else {
                break;
            };
            if dec * 0.5 < 1e-14 {
                break;
            }
            let Some(f0) = barrier.objective(t, &barrier.x_of(&z), &u) else {
                break;
            };
            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..80 {
                let zn = &z + &dz * step;
                let un = &u + &du * step;
                if let Some(f) = barrier.objective(t, &barrier.x_of(&zn), &un) {
                    if f <= f0 - 0.01 * step * dec {
                        z = zn;
                        u = un;
                        accepted = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        let gap = count / t;
        if gap <= 1e-11 * u.sum().max(1.0) {
            break;
        }
        t *= 10.0;
    }
    Ok(barrier.x_of(&z).iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_noiseless() {
        let phi = DMatrix::identity(4, 4);
        let y = [1.0, -2.0, 0.0, 0.5];
        let x = reference_bpdn(&phi, &y, 0.0).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn large_epsilon_gives_zero() {
        let phi = DMatrix::identity(2, 2);
        assert_eq!(reference_bpdn(&phi, &[0.6, 0.8], 1.0).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identity_soft_threshold() {
        let phi = DMatrix::identity(3, 3);
        let x = reference_bpdn(&phi, &[3.0, -1.0, 0.5], 1.0).unwrap();
        let t = libm::sqrt(0.375);
        let want = [3.0 - t, -(1.0 - t), 0.0];
        for (a, b) in x.iter().zip(&want) {
            assert!((a - b).abs() < 1e-6, "{x:?}");
        }
    }

    #[test]
    fn underdetermined_equality() {
        // x1 + x2 = 1 and x2 + x3 = 1: the l1 minimizer is x = (0, 1, 0)
        let phi = DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
        let x = reference_bpdn(&phi, &[1.0, 1.0], 0.0).unwrap();
        assert!((x[0]).abs() < 1e-7 && (x[1] - 1.0).abs() < 1e-7 && x[2].abs() < 1e-7, "{x:?}");
    }

    #[test]
    fn inconsistent_equality_is_infeasible() {
        let phi = DMatrix::from_row_slice(2, 1, &[1.0, 1.0]);
        assert!(matches!(
            reference_bpdn(&phi, &[1.0, -1.0], 0.0),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn size_guard() {
        let phi = DMatrix::zeros(2, 65);
        assert!(reference_bpdn(&phi, &[1.0, 1.0], 0.0).is_err());
    }
}
