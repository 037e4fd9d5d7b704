use alloc::vec;
use alloc::vec::Vec;

use rand_core::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::dims::ProblemDims;
use crate::error::{check_len, Error, Result};

/// Concatenated channel responses `h_{1,j} .. h_{p,j}` seen by one receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub dims: ProblemDims,
    pub h: Vec<f64>,
    /// Nonzero indices (0-based), ascending, when known.
    pub support: Option<Vec<usize>>,
    pub receiver_id: usize,
}

impl ChannelSet {
    /// Wraps `h` and records its exact support.
    pub fn from_vector(dims: ProblemDims, h: Vec<f64>) -> Result<Self> {
        check_len(dims.input_len(), h.len())?;
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let support = support_of(&h);
        Ok(Self {
            dims,
            h,
            support: Some(support),
            receiver_id: 0,
        })
    }

    pub fn zeros(dims: ProblemDims) -> Self {
        Self {
            dims,
            h: vec![0.0; dims.input_len()],
            support: Some(Vec::new()),
            receiver_id: 0,
        }
    }

    /// `s`-sparse channels: support uniform without replacement, amplitudes
    /// iid standard Gaussian.
    pub fn random_sparse<R: RngCore>(dims: ProblemDims, s: usize, rng: &mut R) -> Result<Self> {
        let len = dims.input_len();
        if s > len {
            return Err(Error::InvalidParameter("sparsity exceeds n*p"));
        }
        let mut support = sample_support(len, s, rng);
        support.sort_unstable();
        let mut h = vec![0.0; len];
        for &i in &support {
            let v: f64 = StandardNormal.sample(rng);
            h[i] = v;
        }
        Ok(Self {
            dims,
            h,
            support: Some(support),
            receiver_id: 0,
        })
    }

    /// Compressible channels with power-law decaying magnitudes: the `i`-th
    /// largest entry has magnitude `i^{-decay}`, random sign, random position.
    pub fn power_law<R: RngCore>(dims: ProblemDims, decay: f64, rng: &mut R) -> Self {
        let len = dims.input_len();
        let order = sample_support(len, len, rng);
        let mut h = vec![0.0; len];
        for (rank, &i) in order.iter().enumerate() {
            let sign = if rng.next_u32() & 1 == 0 { 1.0 } else { -1.0 };
            h[i] = sign * libm::pow((rank + 1) as f64, -decay);
        }
        let support = support_of(&h);
        Self {
            dims,
            h,
            support: Some(support),
            receiver_id: 0,
        }
    }

    pub fn with_receiver(mut self, id: usize) -> Self {
        self.receiver_id = id;
        self
    }

    pub fn sparsity(&self) -> usize {
        self.h.iter().filter(|&&v| v != 0.0).count()
    }
}

pub fn support_of(x: &[f64]) -> Vec<usize> {
    x.iter()
        .enumerate()
        .filter(|(_, &v)| v != 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// `s` distinct indices from `0..len`, uniform, by partial Fisher-Yates.
pub fn sample_support<R: RngCore>(len: usize, s: usize, rng: &mut R) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..len).collect();
    for i in 0..s.min(len) {
        let j = i + uniform_below(rng, (len - i) as u64) as usize;
        idx.swap(i, j);
    }
    idx.truncate(s.min(len));
    idx
}

/// Unbiased integer in `0..bound` (Lemire's method with rejection).
pub(crate) fn uniform_below<R: RngCore>(rng: &mut R, bound: u64) -> u64 {
    debug_assert!(bound > 0);
    let threshold = bound.wrapping_neg() % bound;
    loop {
        let x = rng.next_u64();
        let wide = (x as u128) * (bound as u128);
        if (wide as u64) >= threshold {
            return (wide >> 64) as u64;
        }
    }
}

/// Gaussian direction rescaled to norm exactly `eps`; zeros when `eps = 0`.
pub fn noise_with_norm<R: RngCore>(len: usize, eps: f64, rng: &mut R) -> Vec<f64> {
    if eps == 0.0 || len == 0 {
        return vec![0.0; len];
    }
    let mut e: Vec<f64> = (0..len).map(|_| StandardNormal.sample(rng)).collect();
    let norm = libm::sqrt(e.iter().map(|v| v * v).sum());
    for v in &mut e {
        *v *= eps / norm;
    }
    e
}

/// Indices of the `s` largest magnitudes; ties go to the lower index.
pub fn largest_indices(x: &[f64], s: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| {
        x[b].abs()
            .partial_cmp(&x[a].abs())
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx.truncate(s);
    idx.sort_unstable();
    idx
}

/// Best `s`-term approximation: all but the `s` largest magnitudes zeroed.
pub fn best_s_term(x: &[f64], s: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for i in largest_indices(x, s) {
        out[i] = x[i];
    }
    out
}

/// `s^{-1/2} ||x - x_s||_1`, the compressibility term of the stability bound.
pub fn compressibility_term(x: &[f64], s: usize) -> f64 {
    if s == 0 {
        return x.iter().map(|v| v.abs()).sum();
    }
    let xs = best_s_term(x, s);
    let tail: f64 = x.iter().zip(&xs).map(|(a, b)| (a - b).abs()).sum();
    tail / libm::sqrt(s as f64)
}
