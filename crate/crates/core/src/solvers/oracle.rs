use alloc::vec;

use nalgebra::{DMatrix, DVector};

use super::{norm2, Method, RecoveryResult};
use crate::error::{check_len, Error, Result};
use crate::operators::LinearOperator;

/// Least squares restricted to `support` (0-based indices).
///
/// Rank-deficient restrictions get the minimum-norm solution and set
/// `rank_deficient`.
pub fn solve_oracle_ls<O: LinearOperator + ?Sized>(
    op: &O,
    y: &[f64],
    support: &[usize],
) -> Result<RecoveryResult> {
    check_len(op.output_len(), y.len())?;
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let n = op.input_len();
    if support.len() > op.output_len() {
        return Err(Error::InvalidParameter("support larger than the number of observations"));
    }
    if support.iter().any(|&i| i >= n) {
        return Err(Error::InvalidParameter("support index out of range"));
    }
    let mut x = vec![0.0; n];
    if support.is_empty() {
        return Ok(RecoveryResult {
            x_hat: x,
            residual_norm: norm2(y),
            l1_norm: 0.0,
            iterations: 0,
            converged: true,
            method: Method::OracleLs,
            rank_deficient: false,
        });
    }
    let rows = op.output_len();
    let mut a = DMatrix::zeros(rows, support.len());
    for (j, &i) in support.iter().enumerate() {
        for (r, v) in op.column(i)?.into_iter().enumerate() {
            a[(r, j)] = v;
        }
    }
    let svd = a.svd(true, true);
    let sigma_max = svd.singular_values.max();
    let tol = sigma_max * f64::EPSILON * rows.max(support.len()) as f64;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    let z = svd
        .solve(&DVector::from_column_slice(y), tol)
        .map_err(|_| Error::InvalidParameter("least-squares solve failed"))?;
    for (j, &i) in support.iter().enumerate() {
        x[i] = z[j];
    }
    let mut out = RecoveryResult::finish(op, y, x, 1, true, Method::OracleLs)?;
    out.rank_deficient = rank < support.len();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::DenseOperator;

    #[test]
    fn empty_support() {
        let op = DenseOperator(DMatrix::identity(3, 3));
        let out = solve_oracle_ls(&op, &[3.0, 4.0, 0.0], &[]).unwrap();
        assert_eq!(out.x_hat, vec![0.0; 3]);
        assert_eq!(out.residual_norm, 5.0);
    }

    #[test]
    fn duplicate_columns_are_flagged() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
        let op = DenseOperator(a);
        let out = solve_oracle_ls(&op, &[2.0, 0.0, 2.0], &[0, 1]).unwrap();
        assert!(out.rank_deficient);
        // minimum-norm split of the shared coefficient
        assert!((out.x_hat[0] - 1.0).abs() < 1e-12);
        assert!((out.x_hat[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bad_support() {
        let op = DenseOperator(DMatrix::identity(2, 2));
        assert!(solve_oracle_ls(&op, &[1.0, 1.0], &[5]).is_err());
    }
}
