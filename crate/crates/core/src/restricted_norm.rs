//! Restricted `s`-norm and restricted isometry constants.
//!
//! For a square `A`, `||A||_s` is the largest `|y^* A x|` over unit vectors
//! `x`, `y` sharing one support of size at most `s`. For a fixed support
//! `G` that supremum is the spectral norm of the principal submatrix
//! `A[G, G]`, and enlarging `G` can only increase it, so it is enough to
//! scan supports of size exactly `s`.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channels::sample_support;
use crate::error::{Error, Result};
use crate::operators::{build_dense_folded, DEFAULT_DENSE_LIMIT};
use crate::probes::ProbeSet;
use crate::rng::{stream_rng, STREAM_SEARCH};

/// Default budget for exhaustive support enumeration, in elementary operations.
pub const DEFAULT_WORK_LIMIT: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SNormMode {
    Exact,
    RandomizedLowerBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SNormResult {
    pub s: usize,
    pub value: f64,
    pub mode: SNormMode,
    /// Maximizing support (0-based, ascending).
    pub argmax_support: Vec<usize>,
    /// Number of sampled supports; 0 in exact mode.
    pub trials: usize,
}

/// How `rip_delta` should evaluate the `s`-norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RipMode {
    Exact { work_limit: u64 },
    Randomized { trials: usize, seed: u64 },
}

impl Default for RipMode {
    fn default() -> Self {
        RipMode::Exact {
            work_limit: DEFAULT_WORK_LIMIT,
        }
    }
}

/// `C(n, k)`, saturating at `u64::MAX`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Estimated cost of exhaustive enumeration: `C(N, s) * s^3`.
pub fn exact_work(n: usize, s: usize) -> u64 {
    let cube = (s as u64).saturating_pow(3).max(1);
    binomial(n, s).saturating_mul(cube)
}

fn is_symmetric(a: &DMatrix<f64>) -> bool {
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let n = a.nrows();
    (0..n).all(|i| (0..i).all(|j| (a[(i, j)] - a[(j, i)]).abs() <= 1e-12 * scale))
}

/// Spectral norm of `a[support, support]`.
fn principal_norm(a: &DMatrix<f64>, support: &[usize], symmetric: bool) -> f64 {
    match support.len() {
        0 => 0.0,
        1 => a[(support[0], support[0])].abs(),
        k => {
            let sub = DMatrix::from_fn(k, k, |i, j| a[(support[i], support[j])]);
            if symmetric {
                let sub = (&sub + sub.transpose()) * 0.5;
                sub.symmetric_eigenvalues().amax()
            } else {
                sub.singular_values().max()
            }
        }
    }
}

/// Advances `c` to the next size-`k` subset of `0..n` in lexicographic order.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn check_square(a: &DMatrix<f64>, s: usize) -> Result<usize> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: a.ncols(),
        });
    }
    if s > a.nrows() {
        return Err(Error::InvalidParameter("s exceeds matrix size"));
    }
    Ok(a.nrows())
}

/// Exact `||A||_s` by enumerating every support of size `s` in
/// lexicographic order; the first maximizer wins ties.
///
/// Refuses with [`Error::Budget`] when `C(N,s) s^3` exceeds `work_limit`.
pub fn snorm_exact(a: &DMatrix<f64>, s: usize, work_limit: u64) -> Result<SNormResult> {
    let n = check_square(a, s)?;
    let required = exact_work(n, s);
    if required > work_limit {
        return Err(Error::Budget {
            required,
            limit: work_limit,
        });
    }
    let symmetric = is_symmetric(a);
    let mut support: Vec<usize> = (0..s).collect();
    let mut best = (principal_norm(a, &support, symmetric), support.clone());
    if s > 0 {
        while next_combination(&mut support, n) {
            let v = principal_norm(a, &support, symmetric);
            if v > best.0 {
                best = (v, support.clone());
            }
        }
    }
    Ok(SNormResult {
        s,
        value: best.0,
        mode: SNormMode::Exact,
        argmax_support: best.1,
        trials: 0,
    })
}

/// Steepest single-swap ascent from `support`, at most `budget` evaluations.
fn local_search(
    a: &DMatrix<f64>,
    support: &mut [usize],
    mut value: f64,
    symmetric: bool,
    budget: usize,
) -> f64 {
    let n = a.nrows();
    let mut evals = 0;
    loop {
        let mut best: Option<(f64, usize, usize)> = None;
        'scan: for pos in 0..support.len() {
            for cand in 0..n {
                if support.contains(&cand) {
                    continue;
                }
                if evals >= budget {
                    break 'scan;
                }
                evals += 1;
                let mut trial = support.to_vec();
                trial[pos] = cand;
                trial.sort_unstable();
                let v = principal_norm(a, &trial, symmetric);
                if v > best.map_or(value, |b| b.0) {
                    best = Some((v, pos, cand));
                }
            }
        }
        match best {
            Some((v, pos, cand)) => {
                support[pos] = cand;
                support.sort_unstable();
                value = v;
            }
            None => return value,
        }
        if evals >= budget {
            return value;
        }
    }
}

/// Lower bound on `||A||_s` from random supports refined by local search.
///
/// Each trial draws a uniform support and then applies steepest single-index
/// swaps until none improves, capped at `5 s N` evaluations. Deterministic
/// given `seed`.
pub fn snorm_randomized(a: &DMatrix<f64>, s: usize, trials: usize, seed: u64) -> Result<SNormResult> {
    let n = check_square(a, s)?;
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1"));
    }
    let symmetric = is_symmetric(a);
    let mut rng = stream_rng(seed, STREAM_SEARCH);
    let budget = 5 * s * n;
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for _ in 0..trials {
        let mut support = sample_support(n, s, &mut rng);
        support.sort_unstable();
        let start = principal_norm(a, &support, symmetric);
        let v = local_search(a, &mut support, start, symmetric, budget);
        if v > best.0 || (v == best.0 && support < best.1) {
            best = (v, support);
        }
    }
    Ok(SNormResult {
        s,
        value: best.0,
        mode: SNormMode::RandomizedLowerBound,
        argmax_support: best.1,
        trials,
    })
}

/// `Z = I - Phi^* Phi` for the folded operator of `probes`, dense.
pub fn isometry_defect(probes: &ProbeSet, limit: u64) -> Result<DMatrix<f64>> {
    let phi = build_dense_folded(probes, limit)?;
    let n = phi.ncols();
    let guard = (n as u64).saturating_mul(n as u64);
    if guard > limit {
        return Err(Error::DenseLimit {
            elements: guard,
            limit,
        });
    }
    let gram = phi.transpose() * &phi;
    Ok(DMatrix::identity(n, n) - gram)
}

/// `||I - Phi^* Phi||_s`, the restricted isometry constant `delta_s` of the
/// folded operator (exact or a randomized lower bound).
pub fn rip_delta(probes: &ProbeSet, s: usize, mode: RipMode) -> Result<SNormResult> {
    let z = isometry_defect(probes, DEFAULT_DENSE_LIMIT)?;
    match mode {
        RipMode::Exact { work_limit } => snorm_exact(&z, s, work_limit),
        RipMode::Randomized { trials, seed } => snorm_randomized(&z, s, trials, seed),
    }
}

/// Squared-norm ratio `||Phi x||^2 / ||x||^2`, for checking RIP bounds.
pub fn energy_ratio(phi: &DMatrix<f64>, x: &[f64]) -> f64 {
    let v = nalgebra::DVector::from_column_slice(x);
    let y = phi * &v;
    y.norm_squared() / v.norm_squared()
}

#[doc(hidden)]
pub fn all_supports(n: usize, s: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut c: Vec<usize> = (0..s).collect();
    out.push(c.clone());
    if s > 0 {
        while next_combination(&mut c, n) {
            out.push(c.clone());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand_core::RngCore;

    fn sym(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = stream_rng(seed, 9);
        let a = DMatrix::from_fn(n, n, |_, _| (rng.next_u32() as f64 / u32::MAX as f64) - 0.5);
        &a + a.transpose()
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(6, 2), 15);
        assert_eq!(binomial(32, 16), 601_080_390);
        assert_eq!(binomial(3, 5), 0);
        assert_eq!(binomial(1000, 500), u64::MAX);
    }

    #[test]
    fn combinations_are_lexicographic() {
        let all = all_supports(4, 2);
        assert_eq!(
            all,
            vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]
        );
        assert_eq!(all_supports(3, 0), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn identity_has_unit_norm() {
        let eye = DMatrix::<f64>::identity(7, 7);
        for s in 1..=7 {
            assert!((snorm_exact(&eye, s, DEFAULT_WORK_LIMIT).unwrap().value - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn full_support_is_spectral_norm() {
        let a = sym(5, 1);
        let r = snorm_exact(&a, 5, DEFAULT_WORK_LIMIT).unwrap();
        assert!((r.value - a.singular_values().max()).abs() < 1e-12);
        assert_eq!(r.argmax_support, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn zero_matrix() {
        let z = DMatrix::<f64>::zeros(5, 5);
        assert_eq!(snorm_exact(&z, 2, DEFAULT_WORK_LIMIT).unwrap().value, 0.0);
        assert_eq!(snorm_randomized(&z, 2, 3, 1).unwrap().value, 0.0);
    }

    #[test]
    fn budget_is_explicit() {
        let a = sym(30, 2);
        assert!(matches!(
            snorm_exact(&a, 10, DEFAULT_WORK_LIMIT),
            Err(Error::Budget { .. })
        ));
    }

    #[test]
    fn randomized_covers_small_problem() {
        let a = sym(6, 4);
        let exact = snorm_exact(&a, 2, DEFAULT_WORK_LIMIT).unwrap();
        let rand = snorm_randomized(&a, 2, 200, 5).unwrap();
        assert_eq!(rand.value, exact.value);
        let few = snorm_randomized(&a, 2, 1, 5).unwrap();
        assert!(rand.value >= few.value);
    }

    #[test]
    fn nonsymmetric_uses_singular_values() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 0.0, 0.0]);
        let r = snorm_exact(&a, 2, DEFAULT_WORK_LIMIT).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
        assert_eq!(snorm_exact(&a, 1, DEFAULT_WORK_LIMIT).unwrap().value, 0.0);
    }
}
