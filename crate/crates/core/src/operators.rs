//! Measurement operators for superposed multichannel observations.
//!
//! `Phi_lin` stacks the `(m+n-1) x n` Toeplitz convolution matrices of every
//! source side by side; `Phi` is the `m x np` operator obtained after adding
//! the first `n-1` linear observations onto the last `n-1`, which turns each
//! block into the first `n` columns of an `m x m` circulant.
//!
//! Public vectors are real and 0-based. Index formulas in the docs below use
//! the 1-based convention of the file formats.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dims::ProblemDims;
use crate::error::{check_len, Error, Result};
use crate::fft::{max_imag, FftPlan};
use crate::probes::ProbeSet;

/// Default cap on the number of entries in any dense construction.
pub const DEFAULT_DENSE_LIMIT: u64 = 1 << 22;

/// Matrix-free real linear map with an adjoint.
pub trait LinearOperator {
    fn input_len(&self) -> usize;
    fn output_len(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>>;

    /// Column `i`, i.e. the image of the `i`-th unit vector.
    fn column(&self, i: usize) -> Result<Vec<f64>> {
        let mut e = vec![0.0; self.input_len()];
        e[i] = 1.0;
        self.apply(&e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Linear,
    Folded,
}

/// FFT-backed `Phi_lin` or `Phi` for one probe set.
///
/// Immutable after construction; `apply` and `adjoint` allocate their own
/// workspace and can be called concurrently.
#[derive(Debug, Clone)]
pub struct MeasurementOperator<'a> {
    probes: &'a ProbeSet,
    variant: Variant,
    plan: FftPlan,
    /// per-source transfer function at the transform length, source-major
    transfer: Vec<Complex64>,
    transfer_peak: f64,
}

impl<'a> MeasurementOperator<'a> {
    pub fn new(probes: &'a ProbeSet, variant: Variant) -> Self {
        let dims = *probes.dims();
        let len = match variant {
            Variant::Linear => dims.linear_len(),
            Variant::Folded => dims.m,
        };
        let plan = FftPlan::new(len);
        let transfer: Vec<Complex64> = match variant {
            // the circulant spectra are exactly the probe spectra g_k
            Variant::Folded => (0..dims.p).flat_map(|k| probes.spectrum(k).iter().copied()).collect(),
            Variant::Linear => {
                let mut out = Vec::with_capacity(dims.p * len);
                for k in 0..dims.p {
                    let mut buf = vec![Complex64::new(0.0, 0.0); len];
                    for (b, &v) in buf.iter_mut().zip(probes.probe(k)) {
                        b.re = v;
                    }
                    plan.forward(&mut buf);
                    out.extend(buf);
                }
                out
            }
        };
        let transfer_peak = transfer.iter().fold(0.0f64, |a, g| a.max(g.norm()));
        Self {
            probes,
            variant,
            plan,
            transfer,
            transfer_peak,
        }
    }

    pub fn linear(probes: &'a ProbeSet) -> Self {
        Self::new(probes, Variant::Linear)
    }

    pub fn folded(probes: &'a ProbeSet) -> Self {
        Self::new(probes, Variant::Folded)
    }

    pub fn dims(&self) -> &ProblemDims {
        self.probes.dims()
    }

    pub fn probes(&self) -> &'a ProbeSet {
        self.probes
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    fn transfer(&self, k: usize) -> &[Complex64] {
        let len = self.plan.len();
        &self.transfer[k * len..(k + 1) * len]
    }

    /// Zero-pads each source block of `x` to the transform length and
    /// returns `sum_k H_k * fft(x_k)`.
    fn forward_mix(&self, x: &[f64]) -> Vec<Complex64> {
        let dims = self.dims();
        let len = self.plan.len();
        let mut acc = vec![Complex64::new(0.0, 0.0); len];
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        for (k, block) in x.chunks_exact(dims.n).enumerate() {
            if block.iter().all(|&v| v == 0.0) {
                continue;
            }
            buf.fill(Complex64::new(0.0, 0.0));
            for (b, &v) in buf.iter_mut().zip(block) {
                b.re = v;
            }
            self.plan.forward(&mut buf);
            for ((a, b), h) in acc.iter_mut().zip(&buf).zip(self.transfer(k)) {
                *a += b * h;
            }
        }
        acc
    }

    /// Correlates a spectrum with every source and keeps the first `n` lags.
    fn backward_split(&self, spectrum: &[Complex64]) -> Vec<f64> {
        let dims = self.dims();
        let mut out = Vec::with_capacity(dims.input_len());
        let mut buf = vec![Complex64::new(0.0, 0.0); self.plan.len()];
        for k in 0..dims.p {
            for ((b, s), h) in buf.iter_mut().zip(spectrum).zip(self.transfer(k)) {
                *b = s * h.conj();
            }
            self.plan.inverse(&mut buf);
            self.check_real(&buf, spectrum);
            out.extend(buf[..dims.n].iter().map(|v| v.re));
        }
        out
    }

    fn check_real(&self, buf: &[Complex64], reference: &[Complex64]) {
        if cfg!(debug_assertions) {
            let scale = reference.iter().map(|v| v.norm_sqr()).sum::<f64>();
            let scale = libm::sqrt(scale / reference.len().max(1) as f64) * self.transfer_peak.max(1.0);
            debug_assert!(
                max_imag(buf) <= 1e-9 * scale + f64::MIN_POSITIVE,
                "imaginary residue after inverse transform"
            );
        }
    }

    /// `Phi^* Phi x` evaluated in the frequency domain.
    pub fn gram_apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.input_len(), x.len())?;
        let mix = self.forward_mix(x);
        Ok(self.backward_split(&mix))
    }
}

impl LinearOperator for MeasurementOperator<'_> {
    fn input_len(&self) -> usize {
        self.dims().input_len()
    }

    fn output_len(&self) -> usize {
        self.plan.len()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.input_len(), x.len())?;
        let mut acc = self.forward_mix(x);
        self.plan.inverse(&mut acc);
        if cfg!(debug_assertions) {
            let norm = libm::sqrt(x.iter().map(|v| v * v).sum::<f64>());
            debug_assert!(
                max_imag(&acc) <= 1e-9 * norm * self.transfer_peak.max(1.0) + f64::MIN_POSITIVE,
                "imaginary residue after inverse transform"
            );
        }
        Ok(acc.into_iter().map(|v| v.re).collect())
    }

    fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(self.output_len(), y.len())?;
        let mut spec: Vec<Complex64> = y.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.plan.forward(&mut spec);
        Ok(self.backward_split(&spec))
    }
}

/// Adds the first `n-1` linear observations onto the last `n-1`.
///
/// With 1-based indices, for `y_lin` of length `m+n-1`:
/// `out(t) = y_lin(n-1+t)` for `t = 1..=m-n+1` and
/// `out(m-n+1+t) = y_lin(m+t) + y_lin(t)` for `t = 1..=n-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FoldMap {
    pub m: usize,
    pub n: usize,
}

impl FoldMap {
    pub fn new(m: usize, n: usize) -> Result<Self> {
        if n == 0 || m < n {
            return Err(Error::InvalidDims("m must be ≥ n"));
        }
        Ok(Self { m, n })
    }

    pub fn from_dims(dims: &ProblemDims) -> Self {
        Self {
            m: dims.m,
            n: dims.n,
        }
    }

    pub fn input_len(&self) -> usize {
        self.m + self.n - 1
    }

    pub fn apply(&self, y_lin: &[f64]) -> Result<Vec<f64>> {
        check_len(self.input_len(), y_lin.len())?;
        let (m, n) = (self.m, self.n);
        let mut out = y_lin[n - 1..n - 1 + m].to_vec();
        for t in 0..n - 1 {
            out[m - n + 1 + t] += y_lin[t];
        }
        Ok(out)
    }

    pub fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(self.m, y.len())?;
        let (m, n) = (self.m, self.n);
        let mut out = vec![0.0; self.input_len()];
        out[n - 1..n - 1 + m].copy_from_slice(y);
        for t in 0..n - 1 {
            out[t] = y[m - n + 1 + t];
        }
        Ok(out)
    }

    /// The `m x (m+n-1)` fold matrix `A`.
    pub fn dense(&self) -> DMatrix<f64> {
        let (m, n) = (self.m, self.n);
        let mut a = DMatrix::zeros(m, self.input_len());
        for t in 0..m {
            a[(t, n - 1 + t)] = 1.0;
        }
        for t in 0..n - 1 {
            a[(m - n + 1 + t, t)] = 1.0;
        }
        a
    }
}

/// Matrix-free folding: `fold_apply(fm, y_lin) = A y_lin`.
pub fn fold_apply(fm: &FoldMap, y_lin: &[f64]) -> Result<Vec<f64>> {
    fm.apply(y_lin)
}

fn dense_guard(rows: usize, cols: usize, limit: u64) -> Result<()> {
    let elements = (rows as u64).saturating_mul(cols as u64);
    if elements > limit {
        Err(Error::DenseLimit { elements, limit })
    } else {
        Ok(())
    }
}

/// Explicit `(m+n-1) x np` block-Toeplitz `Phi_lin`.
///
/// Column `(k-1)n + c` holds probe `k` delayed by `c-1` samples.
pub fn build_dense_linear(probes: &ProbeSet, limit: u64) -> Result<DMatrix<f64>> {
    let dims = probes.dims();
    let n = dims.n;
    dense_guard(dims.linear_len(), dims.input_len(), limit)?;
    let mut a = DMatrix::zeros(dims.linear_len(), dims.input_len());
    for k in 0..dims.p {
        let phi = probes.probe(k);
        for c in 0..n {
            for (t, &v) in phi.iter().enumerate() {
                a[(t + c, k * n + c)] = v;
            }
        }
    }
    Ok(a)
}

/// Explicit `m x np` folded `Phi`, built entry-wise from the circulant
/// pattern: `Phi_k(t, c) = phi_k(((n + t - c - 1) mod m) + 1)` (1-based).
pub fn build_dense_folded(probes: &ProbeSet, limit: u64) -> Result<DMatrix<f64>> {
    let dims = probes.dims();
    let (n, m) = (dims.n, dims.m);
    dense_guard(m, dims.input_len(), limit)?;
    let mut a = DMatrix::zeros(m, dims.input_len());
    for k in 0..dims.p {
        let phi = probes.probe(k);
        for t in 0..m {
            for c in 0..n {
                a[(t, k * n + c)] = phi[(n - 1 + m + t - c) % m];
            }
        }
    }
    Ok(a)
}

/// Dense matrix wrapped as an operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator(pub DMatrix<f64>);

impl LinearOperator for DenseOperator {
    fn input_len(&self) -> usize {
        self.0.ncols()
    }

    fn output_len(&self) -> usize {
        self.0.nrows()
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.input_len(), x.len())?;
        let a = &self.0;
        Ok((0..a.nrows())
            .map(|i| (0..a.ncols()).map(|j| a[(i, j)] * x[j]).sum())
            .collect())
    }

    fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(self.output_len(), y.len())?;
        let a = &self.0;
        Ok((0..a.ncols())
            .map(|j| (0..a.nrows()).map(|i| a[(i, j)] * y[i]).sum())
            .collect())
    }

    fn column(&self, i: usize) -> Result<Vec<f64>> {
        Ok(self.0.column(i).iter().copied().collect())
    }
}

/// Identity on `R^n`; a test hook for solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdentityOperator(pub usize);

impl LinearOperator for IdentityOperator {
    fn input_len(&self) -> usize {
        self.0
    }

    fn output_len(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.0, x.len())?;
        Ok(x.to_vec())
    }

    fn adjoint(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_len(self.0, y.len())?;
        Ok(y.to_vec())
    }
}

/// Materializes any operator column by column.
pub fn to_dense<O: LinearOperator + ?Sized>(op: &O, limit: u64) -> Result<DMatrix<f64>> {
    dense_guard(op.output_len(), op.input_len(), limit)?;
    let mut a = DMatrix::zeros(op.output_len(), op.input_len());
    for j in 0..op.input_len() {
        for (i, v) in op.column(j)?.into_iter().enumerate() {
            a[(i, j)] = v;
        }
    }
    Ok(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probes::generate_probes;

    fn probes(n: usize, m: usize, p: usize, seed: u64) -> ProbeSet {
        generate_probes(ProblemDims::new(n, m, p).unwrap(), seed).unwrap()
    }

    #[test]
    fn fold_small_example() {
        let fm = FoldMap::new(3, 2).unwrap();
        let out = fold_apply(&fm, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(out, vec![2.0, 3.0, 5.0]);
    }

    #[test]
    fn fold_is_identity_for_unit_channels() {
        let fm = FoldMap::new(5, 1).unwrap();
        let y = [1.0, -2.0, 3.0, 0.5, 9.0];
        assert_eq!(fm.apply(&y).unwrap(), y.to_vec());
        assert_eq!(fm.dense(), DMatrix::identity(5, 5));
    }

    #[test]
    fn fold_adjoint_matches_transpose() {
        let fm = FoldMap::new(7, 3).unwrap();
        let a = fm.dense();
        let y: Vec<f64> = (0..7).map(|i| i as f64 - 2.5).collect();
        let got = fm.adjoint(&y).unwrap();
        let want = a.transpose() * nalgebra::DVector::from_vec(y);
        for (g, w) in got.iter().zip(want.iter()) {
            assert_eq!(g, w);
        }
    }

    #[test]
    fn fold_rejects_wrong_length() {
        let fm = FoldMap::new(3, 2).unwrap();
        assert_eq!(
            fm.apply(&[1.0, 2.0]),
            Err(Error::DimensionMismatch {
                expected: 4,
                found: 2
            })
        );
    }

    #[test]
    fn linear_first_and_last_columns() {
        let pr = probes(3, 6, 1, 4);
        let a = build_dense_linear(&pr, DEFAULT_DENSE_LIMIT).unwrap();
        let phi = pr.probe(0);
        let first: Vec<f64> = a.column(0).iter().copied().collect();
        let mut want = phi.to_vec();
        want.extend([0.0, 0.0]);
        assert_eq!(first, want);
        let last: Vec<f64> = a.column(2).iter().copied().collect();
        let mut want = vec![0.0, 0.0];
        want.extend_from_slice(phi);
        assert_eq!(last, want);
    }

    #[test]
    fn linear_blocks_are_per_source() {
        let pr = probes(3, 6, 2, 8);
        let a = build_dense_linear(&pr, DEFAULT_DENSE_LIMIT).unwrap();
        let single = ProbeSet::from_samples(ProblemDims::new(3, 6, 1).unwrap(), 0, pr.probe(1).to_vec()).unwrap();
        let b = build_dense_linear(&single, DEFAULT_DENSE_LIMIT).unwrap();
        assert_eq!(a.columns(3, 3), b.columns(0, 3));
    }

    #[test]
    fn dense_limit_is_enforced() {
        let pr = probes(4, 8, 2, 1);
        assert!(matches!(
            build_dense_linear(&pr, 10),
            Err(Error::DenseLimit { elements: 88, limit: 10 })
        ));
        assert!(build_dense_folded(&pr, 10).is_err());
    }

    #[test]
    fn folded_equals_fold_of_linear() {
        for (n, m, p) in [(1, 5, 2), (4, 8, 2), (5, 16, 3), (6, 6, 1)] {
            let pr = probes(n, m, p, 21);
            let lin = build_dense_linear(&pr, DEFAULT_DENSE_LIMIT).unwrap();
            let fol = build_dense_folded(&pr, DEFAULT_DENSE_LIMIT).unwrap();
            let a = FoldMap::new(m, n).unwrap().dense();
            assert!((fol.clone() - a * lin.clone()).amax() < 1e-12);
            if n == 1 {
                assert_eq!(fol, lin);
            }
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let pr = probes(4, 9, 3, 2);
        for v in [Variant::Linear, Variant::Folded] {
            let op = MeasurementOperator::new(&pr, v);
            assert!(op.apply(&[0.0; 12]).unwrap().iter().all(|&x| x == 0.0));
            let y = vec![0.0; op.output_len()];
            assert!(op.adjoint(&y).unwrap().iter().all(|&x| x == 0.0));
        }
    }

    #[test]
    fn single_tap_is_shifted_probe() {
        let pr = probes(4, 9, 3, 2);
        let op = MeasurementOperator::linear(&pr);
        let mut x = vec![0.0; 12];
        // source 2, delay 3 (0-based), amplitude 2.5
        x[4 + 3] = 2.5;
        let y = op.apply(&x).unwrap();
        for (t, v) in y.iter().enumerate() {
            let want = if (3..3 + 9).contains(&t) { 2.5 * pr.probe(1)[t - 3] } else { 0.0 };
            assert!((v - want).abs() < 1e-13);
        }
    }

    #[test]
    fn gram_diagonal_identity() {
        let pr = probes(3, 7, 2, 5);
        let op = MeasurementOperator::folded(&pr);
        for i in 0..6 {
            let col = op.column(i).unwrap();
            let back = op.adjoint(&col).unwrap();
            let norm2: f64 = col.iter().map(|v| v * v).sum();
            assert!((back[i] - norm2).abs() < 1e-12);
        }
    }

    #[test]
    fn wrong_lengths_are_rejected() {
        let pr = probes(2, 4, 2, 5);
        let op = MeasurementOperator::folded(&pr);
        assert!(op.apply(&[1.0; 3]).is_err());
        assert!(op.adjoint(&[1.0; 5]).is_err());
        assert!(op.gram_apply(&[1.0; 5]).is_err());
    }
}
