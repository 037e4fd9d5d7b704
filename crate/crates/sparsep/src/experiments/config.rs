use serde::{Deserialize, Serialize};
use sparsep_core::{Method, SolverConfig, Variant};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    RipScaling,
    PhaseTransition,
    Stability,
    CodedAperture,
}

/// Distribution of the unknown channel vector.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum SignalModel {
    /// `s` nonzeros on a uniform support, iid standard Gaussian amplitudes.
    #[default]
    Sparse,
    /// Every entry nonzero, the `i`-th largest of magnitude `i^-decay`.
    PowerLaw { decay: f64 },
}

/// Where the coded-aperture scene is sparse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApertureSparsity {
    /// The subimages themselves are `s`-sparse.
    #[default]
    Direct,
    /// A known dense previous frame plus an `s`-sparse change.
    FrameDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RipEstimator {
    #[default]
    Exact,
    Randomized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RipSettings {
    pub estimator: RipEstimator,
    /// Sampled supports per probe draw in randomized mode.
    pub randomized_trials: usize,
    /// Enumeration budget; the library default when absent.
    pub work_limit: Option<u64>,
}

impl Default for RipSettings {
    fn default() -> Self {
        Self {
            estimator: RipEstimator::Exact,
            randomized_trials: 200,
            work_limit: None,
        }
    }
}

/// A Monte Carlo study over the cartesian grid `n x m x p x s x epsilon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub n: Vec<usize>,
    pub m: Vec<usize>,
    pub p: Vec<usize>,
    pub s: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Noise norms; also the solver's constraint level. Ignored by RIP scaling.
    #[serde(default = "default_epsilon_grid")]
    pub epsilon_grid: Vec<f64>,
    #[serde(default = "default_success_threshold")]
    pub success_threshold: f64,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default = "default_method")]
    pub method: Method,
    /// Operator the observations are drawn from and solved with.
    #[serde(default)]
    pub variant: Option<Variant>,
    #[serde(default)]
    pub signal: SignalModel,
    /// Reuse one probe set and one signal per `(n, m, p, s)` cell, varying only the noise.
    #[serde(default)]
    pub fixed_instance: Option<bool>,
    #[serde(default)]
    pub aperture: ApertureSparsity,
    #[serde(default)]
    pub rip: RipSettings,
}

fn default_trials() -> usize {
    100
}

fn default_epsilon_grid() -> Vec<f64> {
    vec![0.0]
}

fn default_success_threshold() -> f64 {
    1e-4
}

fn default_method() -> Method {
    Method::Bpdn
}

impl ExperimentConfig {
    /// A config with library defaults for everything but the grid.
    pub fn new(kind: ExperimentKind, n: Vec<usize>, m: Vec<usize>, p: Vec<usize>, s: Vec<usize>) -> Self {
        Self {
            kind,
            n,
            m,
            p,
            s,
            trials: default_trials(),
            base_seed: 0,
            epsilon_grid: default_epsilon_grid(),
            success_threshold: default_success_threshold(),
            solver: SolverConfig::default(),
            method: default_method(),
            variant: None,
            signal: SignalModel::default(),
            fixed_instance: None,
            aperture: ApertureSparsity::default(),
            rip: RipSettings::default(),
        }
    }

    pub fn with_trials(mut self, trials: usize) -> Self {
        self.trials = trials;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.base_seed = seed;
        self
    }

    pub fn with_epsilons(mut self, eps: Vec<f64>) -> Self {
        self.epsilon_grid = eps;
        self
    }

    pub fn variant(&self) -> Variant {
        self.variant.unwrap_or(match self.kind {
            ExperimentKind::Stability => Variant::Linear,
            _ => Variant::Folded,
        })
    }

    pub fn fixed_instance(&self) -> bool {
        self.fixed_instance
            .unwrap_or(self.kind == ExperimentKind::Stability)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Usage(format!("invalid experiment config: {msg}")));
        if self.n.is_empty() || self.m.is_empty() || self.p.is_empty() || self.s.is_empty() {
            return bad("grids n, m, p and s must be non-empty");
        }
        if self.kind != ExperimentKind::RipScaling && self.epsilon_grid.is_empty() {
            return bad("epsilon_grid must be non-empty");
        }
        if self.trials == 0 {
            return bad("trials must be >= 1");
        }
        if self.epsilon_grid.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
            return bad("epsilon values must be finite and >= 0");
        }
        if self.success_threshold.is_nan() || self.success_threshold <= 0.0 {
            return bad("success_threshold must be > 0");
        }
        if let SignalModel::PowerLaw { decay } = self.signal {
            if !(decay.is_finite() && decay > 0.0) {
                return bad("power-law decay must be > 0");
            }
        }
        if self.rip.estimator == RipEstimator::Randomized && self.rip.randomized_trials == 0 {
            return bad("rip.randomized_trials must be >= 1");
        }
        self.solver.validate()?;
        Ok(())
    }
}
