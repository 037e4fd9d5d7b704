//! Numerical core for sparse multichannel separation with random probes.
//!
//! `p` sources emit random Gaussian probes simultaneously; a receiver sees
//! the superposition of every probe convolved with its own channel. This
//! crate builds the resulting concatenated-convolution operators (linear and
//! folded/circulant, dense and FFT-based), measures their restricted
//! isometry constants, and recovers sparse channel vectors by basis pursuit
//! denoising, iterative hard thresholding or oracle least squares.
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;

pub mod channels;
pub mod dims;
pub mod error;
pub mod fft;
pub mod operators;
pub mod probes;
pub mod restricted_norm;
pub mod rng;
pub mod solvers;
pub mod spectral;

pub use channels::{noise_with_norm, ChannelSet};
pub use dims::ProblemDims;
pub use error::{Error, Result};
pub use operators::{
    build_dense_folded, build_dense_linear, fold_apply, FoldMap, LinearOperator,
    MeasurementOperator, Variant, DEFAULT_DENSE_LIMIT,
};
pub use probes::{empirical_spectrum_stats, generate_probes, probe_spectrum, ProbeSet};
pub use restricted_norm::{
    rip_delta, snorm_exact, snorm_randomized, RipMode, SNormMode, SNormResult, DEFAULT_WORK_LIMIT,
};
pub use solvers::{
    reference_bpdn, solve_bpdn, solve_iht, solve_oracle_ls, Method, RecoveryResult, SolverConfig,
    StepMode,
};
