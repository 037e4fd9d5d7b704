use std::io::Write;

use serde::{Deserialize, Serialize};
use sparsep_core::Method;

use super::config::ExperimentConfig;
use crate::error::{Error, Result};

/// One Monte Carlo trial, with everything needed to replay it alone via
/// [`super::replay_trial`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub grid_index: usize,
    pub trial: usize,
    /// Drives the noise, and the probes and signal unless the instance is fixed.
    pub seed: u64,
    /// Drives the probes and the signal.
    pub instance_seed: u64,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub s: usize,
    pub epsilon: f64,
    pub method: Option<Method>,
    pub relative_error: Option<f64>,
    /// Absolute error `||x_hat - h||_2`.
    pub error_norm: Option<f64>,
    pub residual: Option<f64>,
    pub success: Option<bool>,
    pub converged: Option<bool>,
    /// Restricted isometry estimate `||I - Phi^* Phi||_s`.
    pub delta: Option<f64>,
    /// `s^{-1/2} ||h - h_s||_1` of the true signal.
    pub compressibility: Option<f64>,
    /// Peak signal-to-noise ratio of the reconstructed frame in dB; absent
    /// when the reconstruction is exact.
    pub psnr: Option<f64>,
    pub error: Option<String>,
    /// Seconds; excluded from every reproducibility guarantee.
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub grid_index: usize,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub s: usize,
    pub epsilon: f64,
    pub trials: usize,
    pub successes: Option<usize>,
    pub success_rate: Option<f64>,
    /// Binomial standard error `sqrt(q (1 - q) / trials)` of the success rate.
    pub success_std_error: Option<f64>,
    pub median_error: Option<f64>,
    pub not_converged: usize,
    pub mean_delta: Option<f64>,
    pub median_delta: Option<f64>,
    pub mean_compressibility: Option<f64>,
    pub median_psnr: Option<f64>,
    /// Set when the grid point could not be evaluated at all.
    pub error: Option<String>,
}

/// A grid point's trials and their summary; the unit of checkpointing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    pub summary: GridSummary,
    pub trials: Vec<TrialRecord>,
}

/// Least-squares fit of `log(mean delta)` against `log m` at fixed `(n, p, s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub n: usize,
    pub p: usize,
    pub s: usize,
    pub m: Vec<usize>,
    pub mean_delta: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
}

/// Ratio of median errors between two consecutive noise levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRatio {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub s: usize,
    pub epsilon_low: f64,
    pub epsilon_high: f64,
    pub median_low: f64,
    pub median_high: f64,
    pub ratio: f64,
}

/// Fit of `error ~ noise_coef * epsilon + tail_coef * compressibility`
/// over every trial of one `(n, m, p, s)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityFit {
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub s: usize,
    pub noise_coef: f64,
    pub tail_coef: f64,
    pub rms_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub format_version: String,
    pub tool_version: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub grid: Vec<GridSummary>,
    pub trials: Vec<TrialRecord>,
    #[serde(default)]
    pub scaling_fits: Vec<ScalingFit>,
    #[serde(default)]
    pub error_ratios: Vec<ErrorRatio>,
    #[serde(default)]
    pub stability_fits: Vec<StabilityFit>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    grid_index: usize,
    trial: usize,
    seed: u64,
    instance_seed: u64,
    n: usize,
    m: usize,
    p: usize,
    s: usize,
    epsilon: f64,
    method: Option<&'static str>,
    relative_error: Option<f64>,
    error_norm: Option<f64>,
    residual: Option<f64>,
    success: Option<bool>,
    converged: Option<bool>,
    delta: Option<f64>,
    compressibility: Option<f64>,
    psnr: Option<f64>,
    error: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_time: Option<f64>,
}

fn method_name(m: Method) -> &'static str {
    match m {
        Method::Bpdn => "bpdn",
        Method::Iht => "iht",
        Method::OracleLs => "oracle",
    }
}

/// Writes one CSV row per trial. Without `with_timing` the output depends
/// only on the config, so reruns are byte-identical.
pub fn write_trials_csv<W: Write>(out: W, trials: &[TrialRecord], with_timing: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for t in trials {
        w.serialize(CsvRow {
            grid_index: t.grid_index,
            trial: t.trial,
            seed: t.seed,
            instance_seed: t.instance_seed,
            n: t.n,
            m: t.m,
            p: t.p,
            s: t.s,
            epsilon: t.epsilon,
            method: t.method.map(method_name),
            relative_error: t.relative_error,
            error_norm: t.error_norm,
            residual: t.residual,
            success: t.success,
            converged: t.converged,
            delta: t.delta,
            compressibility: t.compressibility,
            psnr: t.psnr,
            error: t.error.as_deref(),
            wall_time: with_timing.then_some(t.wall_time),
        })
        .map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io("<csv>", io),
        other => Error::Usage(format!("csv: {other:?}")),
    }
}
