//! Random probe ensembles and their Fourier-domain description.
//!
//! Probes are drawn in the time domain, iid `Normal(0, 1/m)`. The spectral
//! sequence `g_k` of source `k` is derived from the samples: it is the
//! diagonal that makes the folded block `Phi_k` equal to `F^* G_k F_(1:n)`
//! with the unitary DFT `F(w, t) = m^{-1/2} exp(-2 pi i (w-1)(t-1) / m)`.
//! Writing `c_k(d) = phi_k((n - 1 + d) mod m)` (0-based) for the first column
//! of the circulant, `g_k` is the unnormalized DFT of `c_k`, i.e.
//! `sqrt(m) * F c_k`. With this scaling `E|g_k(w)|^2 = 1` in every bin.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

use crate::dims::ProblemDims;
use crate::error::{check_len, Error, Result};
use crate::fft::{fft_real, FftPlan};
use crate::rng::{stream_rng, STREAM_PROBES};

/// Probe waveforms for `p` sources plus their derived spectra.
///
/// Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSet {
    dims: ProblemDims,
    seed: u64,
    /// time-domain samples, row-major by source then time
    phi: Vec<f64>,
    /// spectra `g_k(w)`, row-major by source then frequency bin
    g: Vec<Complex64>,
}

impl ProbeSet {
    /// Wraps explicit samples (`p * m` values, source-major).
    ///
    /// Used by the file reader and by tests that need hand-built probes.
    pub fn from_samples(dims: ProblemDims, seed: u64, phi: Vec<f64>) -> Result<Self> {
        dims.validate()?;
        check_len(dims.p * dims.m, phi.len())?;
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let g = spectra(&dims, &phi);
        Ok(Self { dims, seed, phi, g })
    }

    pub fn dims(&self) -> &ProblemDims {
        &self.dims
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// All samples, source-major.
    pub fn samples(&self) -> &[f64] {
        &self.phi
    }

    /// Waveform of source `k` (0-based).
    pub fn probe(&self, k: usize) -> &[f64] {
        let m = self.dims.m;
        &self.phi[k * m..(k + 1) * m]
    }

    /// Spectrum `g_k` of source `k` (0-based), `m` bins.
    pub fn spectrum(&self, k: usize) -> &[Complex64] {
        let m = self.dims.m;
        &self.g[k * m..(k + 1) * m]
    }

    /// Energy `||phi_k||^2` of every source.
    pub fn energies(&self) -> Vec<f64> {
        (0..self.dims.p)
            .map(|k| self.probe(k).iter().map(|v| v * v).sum())
            .collect()
    }
}

fn spectra(dims: &ProblemDims, phi: &[f64]) -> Vec<Complex64> {
    let (n, m) = (dims.n, dims.m);
    let plan = FftPlan::new(m);
    let mut out = Vec::with_capacity(dims.p * m);
    let mut column = vec![0.0; m];
    for probe in phi.chunks_exact(m) {
        for (d, c) in column.iter_mut().enumerate() {
            *c = probe[(n - 1 + d) % m];
        }
        out.extend(fft_real(&plan, &column));
    }
    out
}

/// Draws `p` probes of length `m`, entries iid `Normal(0, 1/m)`.
///
/// Deterministic in `(dims, seed)`.
pub fn generate_probes(dims: ProblemDims, seed: u64) -> Result<ProbeSet> {
    dims.validate()?;
    let mut rng = stream_rng(seed, STREAM_PROBES);
    let sd = libm::sqrt(1.0 / dims.m as f64);
    let phi = (0..dims.p * dims.m)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * sd
        })
        .collect();
    ProbeSet::from_samples(dims, seed, phi)
}

/// Spectra `g_k` for every source, one `Vec` of `m` bins per source.
pub fn probe_spectrum(probes: &ProbeSet) -> Vec<Vec<Complex64>> {
    (0..probes.dims.p)
        .map(|k| probes.spectrum(k).to_vec())
        .collect()
}

/// Mean of `|g_k(w)|^2` over sources, per bin.
pub fn empirical_spectrum_stats(probes: &ProbeSet) -> Vec<f64> {
    let (m, p) = (probes.dims.m, probes.dims.p);
    let mut acc = vec![0.0; m];
    for k in 0..p {
        for (a, g) in acc.iter_mut().zip(probes.spectrum(k)) {
            *a += g.norm_sqr();
        }
    }
    for a in acc.iter_mut() {
        *a /= p as f64;
    }
    acc
}
