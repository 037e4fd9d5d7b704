//! Dense Fourier-domain forms of the folded operator.
//!
//! These are slow, explicit constructions used to check the fast paths and
//! the algebraic identities behind the analysis of `Phi^* Phi`:
//! the blockwise factorization `Phi_k = F^* G_k F_(1:n)`, the atoms
//! `f_{k,w}`, the resolution of identity `sum_{k,w} f_{k,w} f_{k,w}^* = I`
//! and the rank-one expansion of the Gram matrix.

use core::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::dims::ProblemDims;
use crate::probes::ProbeSet;

/// Unitary DFT matrix, `F(w, t) = m^{-1/2} exp(-2 pi i w t / m)` (0-based).
pub fn dft_matrix(m: usize) -> DMatrix<Complex64> {
    let scale = 1.0 / libm::sqrt(m as f64);
    DMatrix::from_fn(m, m, |w, t| {
        Complex64::from_polar(scale, -2.0 * PI * ((w * t) % m) as f64 / m as f64)
    })
}

/// `F^* G_k F_(1:n)` for source `k` (0-based), an `m x n` complex matrix.
pub fn fourier_block(probes: &ProbeSet, k: usize) -> DMatrix<Complex64> {
    let dims = probes.dims();
    let f = dft_matrix(dims.m);
    let g = DMatrix::from_diagonal(&DVector::from_column_slice(probes.spectrum(k)));
    f.adjoint() * g * f.columns(0, dims.n)
}

/// Atom `f_{k,w}`: column `w` of `F_(1:n)^*` placed in block `k`, zero elsewhere.
pub fn fourier_atom(dims: &ProblemDims, k: usize, w: usize) -> DVector<Complex64> {
    let (n, m) = (dims.n, dims.m);
    let scale = 1.0 / libm::sqrt(m as f64);
    let mut v = DVector::zeros(dims.input_len());
    for t in 0..n {
        v[k * n + t] = Complex64::from_polar(scale, 2.0 * PI * ((w * t) % m) as f64 / m as f64);
    }
    v
}

/// `sum_{k,w} f_{k,w} f_{k,w}^*`, which should be the identity.
pub fn atom_resolution(dims: &ProblemDims) -> DMatrix<Complex64> {
    let mut acc = DMatrix::zeros(dims.input_len(), dims.input_len());
    for k in 0..dims.p {
        for w in 0..dims.m {
            let f = fourier_atom(dims, k, w);
            acc += &f * f.adjoint();
        }
    }
    acc
}

/// `sum_{k,j,w} conj(g_k(w)) g_j(w) f_{k,w} f_{j,w}^*`.
pub fn gram_rank_one_expansion(probes: &ProbeSet) -> DMatrix<Complex64> {
    let dims = probes.dims();
    let mut acc = DMatrix::zeros(dims.input_len(), dims.input_len());
    for w in 0..dims.m {
        let atoms: alloc::vec::Vec<DVector<Complex64>> =
            (0..dims.p).map(|k| fourier_atom(dims, k, w)).collect();
        for k in 0..dims.p {
            for j in 0..dims.p {
                let coef = probes.spectrum(k)[w].conj() * probes.spectrum(j)[w];
                acc += (&atoms[k] * atoms[j].adjoint()) * coef;
            }
        }
    }
    acc
}
