//! Monte Carlo harnesses.
//!
//! An experiment walks the cartesian grid `n x m x p x s x epsilon` (in that
//! nesting order, epsilon innermost) and runs `trials` independent trials at
//! every point. Trial `t` of the `(n, m, p)` cell with index `c` uses
//!
//! ```text
//! seed          = trial_seed(base_seed, c, t)
//! instance_seed = seed, or trial_seed(base_seed, c, u64::MAX) for fixed instances
//! ```
//!
//! where `trial_seed` is [`sparsep_core::rng::trial_seed`]. Probes come from
//! `instance_seed`, the signal from its signal stream and the noise from the
//! noise stream of `seed`. All sparsity and noise levels of a cell thus see
//! the same probes, nested supports and the same noise directions. Seeds
//! never depend on scheduling, and results are gathered in trial order, so
//! the thread count cannot change any output other than wall times.

mod config;
mod record;
pub mod stats;

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use sparsep_core::channels::{compressibility_term, largest_indices};
use sparsep_core::restricted_norm::{exact_work, isometry_defect};
use sparsep_core::rng::{stream_rng, trial_seed, STREAM_NOISE, STREAM_SIGNAL};
use sparsep_core::solvers::relative_error;
use sparsep_core::{
    generate_probes, noise_with_norm, snorm_exact, snorm_randomized, solve_bpdn, solve_iht,
    solve_oracle_ls, ChannelSet, LinearOperator, MeasurementOperator, Method, ProblemDims,
    RecoveryResult, DEFAULT_DENSE_LIMIT, DEFAULT_WORK_LIMIT,
};

pub use config::{
    ApertureSparsity, ExperimentConfig, ExperimentKind, RipEstimator, RipSettings, SignalModel,
};
pub use record::{
    write_trials_csv, ErrorRatio, ExperimentRecord, GridOutcome, GridSummary, ScalingFit,
    StabilityFit, TrialRecord,
};

use crate::error::{Error, Result};

/// Stream of the dense previous frame in frame-difference scenes.
const STREAM_FRAME: u64 = 4;
const FIXED_INSTANCE_TRIAL: u64 = u64::MAX;

/// Execution knobs that do not affect results.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Worker threads; 0 uses the rayon default.
    pub threads: usize,
    /// Overrides the enumeration budget of the config and the library default.
    pub work_limit: Option<u64>,
    /// Overrides the dense-matrix element limit.
    pub dense_limit: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub index: usize,
    /// Index of the `(n, m, p)` cell, shared by its sparsity and noise levels.
    pub cell: usize,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub s: usize,
    pub epsilon: f64,
}

pub fn grid_points(cfg: &ExperimentConfig) -> Vec<GridPoint> {
    let eps: &[f64] = if cfg.kind == ExperimentKind::RipScaling {
        &[0.0]
    } else {
        &cfg.epsilon_grid
    };
    let mut out = Vec::new();
    let mut cell = 0;
    for &n in &cfg.n {
        for &m in &cfg.m {
            for &p in &cfg.p {
                for &s in &cfg.s {
                    for &epsilon in eps {
                        out.push(GridPoint {
                            index: out.len(),
                            cell,
                            n,
                            m,
                            p,
                            s,
                            epsilon,
                        });
                    }
                }
                cell += 1;
            }
        }
    }
    out
}

struct Limits {
    work: u64,
    dense: u64,
}

impl Limits {
    fn new(cfg: &ExperimentConfig, opts: &RunOptions) -> Self {
        Self {
            work: opts
                .work_limit
                .or(cfg.rip.work_limit)
                .unwrap_or(DEFAULT_WORK_LIMIT),
            dense: opts.dense_limit.unwrap_or(DEFAULT_DENSE_LIMIT),
        }
    }
}

fn seeds(cfg: &ExperimentConfig, point: &GridPoint, trial: usize) -> (u64, u64) {
    let seed = trial_seed(cfg.base_seed, point.cell as u64, trial as u64);
    let instance = if cfg.fixed_instance() {
        trial_seed(cfg.base_seed, point.cell as u64, FIXED_INSTANCE_TRIAL)
    } else {
        seed
    };
    (seed, instance)
}

/// Checks that every trial of a grid point can run at all.
fn check_point(cfg: &ExperimentConfig, point: &GridPoint, limits: &Limits) -> Result<ProblemDims> {
    let dims = ProblemDims::new(point.n, point.m, point.p)?;
    let big_n = dims.input_len();
    if point.s > big_n {
        return Err(Error::Usage(format!("s = {} exceeds n*p = {big_n}", point.s)));
    }
    if cfg.kind == ExperimentKind::RipScaling {
        if point.s == 0 {
            return Err(Error::Usage("s must be >= 1 for RIP estimates".into()));
        }
        let cells = (dims.m as u64) * (big_n as u64);
        if cells > limits.dense || (big_n as u64).pow(2) > limits.dense {
            return Err(sparsep_core::Error::DenseLimit {
                elements: cells.max((big_n as u64).pow(2)),
                limit: limits.dense,
            }
            .into());
        }
        if cfg.rip.estimator == RipEstimator::Exact && exact_work(big_n, point.s) > limits.work {
            return Err(sparsep_core::Error::Budget {
                required: exact_work(big_n, point.s),
                limit: limits.work,
            }
            .into());
        }
    }
    Ok(dims)
}

fn blank_record(point: &GridPoint, trial: usize, seed: u64, instance_seed: u64) -> TrialRecord {
    TrialRecord {
        grid_index: point.index,
        trial,
        seed,
        instance_seed,
        n: point.n,
        m: point.m,
        p: point.p,
        s: point.s,
        epsilon: point.epsilon,
        method: None,
        relative_error: None,
        error_norm: None,
        residual: None,
        success: None,
        converged: None,
        delta: None,
        compressibility: None,
        psnr: None,
        error: None,
        wall_time: 0.0,
    }
}

fn run_trial(cfg: &ExperimentConfig, point: &GridPoint, dims: ProblemDims, trial: usize, limits: &Limits) -> TrialRecord {
    let start = Instant::now();
    let (seed, instance_seed) = seeds(cfg, point, trial);
    let mut rec = blank_record(point, trial, seed, instance_seed);
    let outcome = match cfg.kind {
        ExperimentKind::RipScaling => rip_trial(cfg, point, dims, limits, &mut rec),
        ExperimentKind::PhaseTransition | ExperimentKind::Stability => {
            recovery_trial(cfg, point, dims, &mut rec)
        }
        ExperimentKind::CodedAperture => aperture_trial(cfg, point, dims, &mut rec),
    };
    if let Err(e) = outcome {
        rec.error = Some(e.to_string());
        if cfg.kind != ExperimentKind::RipScaling {
            rec.success = Some(false);
        }
    }
    rec.wall_time = start.elapsed().as_secs_f64();
    rec
}

fn rip_trial(cfg: &ExperimentConfig, point: &GridPoint, dims: ProblemDims, limits: &Limits, rec: &mut TrialRecord) -> Result<()> {
    let probes = generate_probes(dims, rec.instance_seed)?;
    let z = isometry_defect(&probes, limits.dense)?;
    let value = match cfg.rip.estimator {
        RipEstimator::Exact => snorm_exact(&z, point.s, limits.work)?,
        RipEstimator::Randomized => snorm_randomized(&z, point.s, cfg.rip.randomized_trials, rec.seed)?,
    };
    rec.delta = Some(value.value);
    Ok(())
}

fn draw_signal(cfg: &ExperimentConfig, dims: ProblemDims, s: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = stream_rng(seed, STREAM_SIGNAL);
    Ok(match cfg.signal {
        SignalModel::Sparse => ChannelSet::random_sparse(dims, s, &mut rng)?.h,
        SignalModel::PowerLaw { decay } => ChannelSet::power_law(dims, decay, &mut rng).h,
    })
}

fn solve<O: LinearOperator + ?Sized>(cfg: &ExperimentConfig, op: &O, y: &[f64], epsilon: f64, truth: &[f64], s: usize) -> Result<RecoveryResult> {
    Ok(match cfg.method {
        Method::Bpdn => solve_bpdn(op, y, &cfg.solver.with_epsilon(epsilon))?,
        Method::Iht => solve_iht(op, y, &cfg.solver.with_sparsity(s.max(1)))?,
        Method::OracleLs => solve_oracle_ls(op, y, &largest_indices(truth, s))?,
    })
}

fn observe(op: &MeasurementOperator<'_>, x: &[f64], epsilon: f64, seed: u64) -> Result<Vec<f64>> {
    let mut y = op.apply(x)?;
    let e = noise_with_norm(y.len(), epsilon, &mut stream_rng(seed, STREAM_NOISE));
    for (yi, ei) in y.iter_mut().zip(e) {
        *yi += ei;
    }
    Ok(y)
}

fn record_solution(cfg: &ExperimentConfig, rec: &mut TrialRecord, out: &RecoveryResult, estimate: &[f64], truth: &[f64]) {
    let rel = relative_error(estimate, truth);
    let abs: f64 = estimate
        .iter()
        .zip(truth)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    rec.method = Some(cfg.method);
    rec.relative_error = Some(rel);
    rec.error_norm = Some(abs);
    rec.residual = Some(out.residual_norm);
    rec.converged = Some(out.converged);
    rec.success = Some(out.converged && rel < cfg.success_threshold);
}

fn recovery_trial(cfg: &ExperimentConfig, point: &GridPoint, dims: ProblemDims, rec: &mut TrialRecord) -> Result<()> {
    let probes = generate_probes(dims, rec.instance_seed)?;
    let op = MeasurementOperator::new(&probes, cfg.variant());
    let h = draw_signal(cfg, dims, point.s, rec.instance_seed)?;
    rec.compressibility = Some(compressibility_term(&h, point.s));
    let y = observe(&op, &h, point.epsilon, rec.seed)?;
    let out = solve(cfg, &op, &y, point.epsilon, &h, point.s)?;
    record_solution(cfg, rec, &out, &out.x_hat, &h);
    Ok(())
}

/// PSNR in dB with the peak taken from the reference frame; `None` when
/// the estimate is exact or the frame is blank.
pub fn psnr(estimate: &[f64], frame: &[f64]) -> Option<f64> {
    let mse = estimate
        .iter()
        .zip(frame)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / frame.len().max(1) as f64;
    let peak = frame.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if mse == 0.0 || peak == 0.0 {
        None
    } else {
        Some(10.0 * (peak * peak / mse).log10())
    }
}

/// Coded-aperture scene: block `k` of the unknown is subimage `k`. Success
/// is judged on the sparse unknown (the scene, or the change since the
/// previous frame); PSNR on the reconstructed frame.
fn aperture_trial(cfg: &ExperimentConfig, point: &GridPoint, dims: ProblemDims, rec: &mut TrialRecord) -> Result<()> {
    let probes = generate_probes(dims, rec.instance_seed)?;
    let op = MeasurementOperator::new(&probes, cfg.variant());
    let sparse = draw_signal(cfg, dims, point.s, rec.instance_seed)?;
    rec.compressibility = Some(compressibility_term(&sparse, point.s));
    let previous = match cfg.aperture {
        ApertureSparsity::Direct => vec![0.0; dims.input_len()],
        ApertureSparsity::FrameDifference => {
            let mut rng = stream_rng(rec.instance_seed, STREAM_FRAME);
            ChannelSet::random_sparse(dims, dims.input_len(), &mut rng)?.h
        }
    };
    let frame: Vec<f64> = previous.iter().zip(&sparse).map(|(a, b)| a + b).collect();
    let mut y = observe(&op, &frame, point.epsilon, rec.seed)?;
    for (yi, pi) in y.iter_mut().zip(op.apply(&previous)?) {
        *yi -= pi;
    }
    let out = solve(cfg, &op, &y, point.epsilon, &sparse, point.s)?;
    record_solution(cfg, rec, &out, &out.x_hat, &sparse);
    let estimate: Vec<f64> = previous.iter().zip(&out.x_hat).map(|(a, b)| a + b).collect();
    rec.psnr = psnr(&estimate, &frame);
    Ok(())
}

fn summarize(point: &GridPoint, trials: &[TrialRecord]) -> GridSummary {
    let graded: Vec<bool> = trials.iter().filter_map(|t| t.success).collect();
    let successes = (!graded.is_empty()).then(|| graded.iter().filter(|&&b| b).count());
    let rate = successes.map(|k| k as f64 / graded.len() as f64);
    GridSummary {
        grid_index: point.index,
        n: point.n,
        m: point.m,
        p: point.p,
        s: point.s,
        epsilon: point.epsilon,
        trials: trials.len(),
        successes,
        success_rate: rate,
        success_std_error: rate.map(|q| stats::binomial_std_error(q, graded.len())),
        median_error: stats::median(trials.iter().filter_map(|t| t.relative_error)),
        not_converged: trials.iter().filter(|t| t.converged == Some(false)).count(),
        mean_delta: stats::mean(trials.iter().filter_map(|t| t.delta)),
        median_delta: stats::median(trials.iter().filter_map(|t| t.delta)),
        mean_compressibility: stats::mean(trials.iter().filter_map(|t| t.compressibility)),
        median_psnr: stats::median(trials.iter().filter_map(|t| t.psnr)),
        error: None,
    }
}

fn failed_point(point: &GridPoint, err: &Error) -> GridOutcome {
    let mut summary = summarize(point, &[]);
    summary.error = Some(err.to_string());
    GridOutcome {
        summary,
        trials: Vec::new(),
    }
}

fn run_point(cfg: &ExperimentConfig, point: &GridPoint, limits: &Limits) -> GridOutcome {
    let dims = match check_point(cfg, point, limits) {
        Ok(d) => d,
        Err(e) => return failed_point(point, &e),
    };
    let trials: Vec<TrialRecord> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, point, dims, t, limits))
        .collect();
    GridOutcome {
        summary: summarize(point, &trials),
        trials,
    }
}

/// Reruns one trial in isolation; the result equals the original record up
/// to wall time.
pub fn replay_trial(cfg: &ExperimentConfig, grid_index: usize, trial: usize, opts: &RunOptions) -> Result<TrialRecord> {
    cfg.validate()?;
    let point = grid_points(cfg)
        .into_iter()
        .nth(grid_index)
        .ok_or_else(|| Error::Usage(format!("no grid point {grid_index}")))?;
    let limits = Limits::new(cfg, opts);
    let dims = check_point(cfg, &point, &limits)?;
    Ok(run_trial(cfg, &point, dims, trial, &limits))
}

/// Runs every grid point not already in `completed`, reporting each fresh
/// outcome to `on_point` (for checkpointing) before moving on.
pub fn run_experiment_resumable(
    cfg: &ExperimentConfig,
    opts: &RunOptions,
    completed: &BTreeMap<usize, GridOutcome>,
    mut on_point: impl FnMut(&GridOutcome) -> Result<()>,
) -> Result<ExperimentRecord> {
    cfg.validate()?;
    let limits = Limits::new(cfg, opts);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads)
        .build()
        .map_err(|e| Error::Usage(format!("thread pool: {e}")))?;
    let points = grid_points(cfg);
    let mut outcomes = Vec::with_capacity(points.len());
    for point in &points {
        if let Some(done) = completed.get(&point.index) {
            outcomes.push(done.clone());
            continue;
        }
        let outcome = pool.install(|| run_point(cfg, point, &limits));
        on_point(&outcome)?;
        outcomes.push(outcome);
    }
    Ok(assemble(cfg, &points, outcomes))
}

pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentRecord> {
    run_experiment_resumable(cfg, opts, &BTreeMap::new(), |_| Ok(()))
}

fn run_as(kind: ExperimentKind, cfg: &ExperimentConfig) -> Result<ExperimentRecord> {
    let mut cfg = cfg.clone();
    cfg.kind = kind;
    run_experiment(&cfg, &RunOptions::default())
}

/// Mean `||I - Phi^* Phi||_s` per grid point and its log-log slope in `m`.
pub fn run_rip_scaling(cfg: &ExperimentConfig) -> Result<ExperimentRecord> {
    run_as(ExperimentKind::RipScaling, cfg)
}

/// Noiseless (or noisy) recovery success rates over the grid.
pub fn run_phase_transition(cfg: &ExperimentConfig) -> Result<ExperimentRecord> {
    run_as(ExperimentKind::PhaseTransition, cfg)
}

/// Error against noise level and compressibility.
pub fn run_stability(cfg: &ExperimentConfig) -> Result<ExperimentRecord> {
    run_as(ExperimentKind::Stability, cfg)
}

/// Phase transition with subimage semantics and PSNR.
pub fn run_coded_aperture(cfg: &ExperimentConfig) -> Result<ExperimentRecord> {
    run_as(ExperimentKind::CodedAperture, cfg)
}

fn assemble(cfg: &ExperimentConfig, points: &[GridPoint], outcomes: Vec<GridOutcome>) -> ExperimentRecord {
    let mut grid = Vec::with_capacity(outcomes.len());
    let mut trials = Vec::new();
    for o in outcomes {
        grid.push(o.summary);
        trials.extend(o.trials);
    }
    let mut record = ExperimentRecord {
        format_version: crate::io::FORMAT_VERSION.to_string(),
        tool_version: crate::manifest::TOOL_VERSION.to_string(),
        config_hash: crate::manifest::config_hash(cfg),
        config: cfg.clone(),
        grid,
        trials,
        scaling_fits: Vec::new(),
        error_ratios: Vec::new(),
        stability_fits: Vec::new(),
    };
    match cfg.kind {
        ExperimentKind::RipScaling => record.scaling_fits = scaling_fits(&record.grid),
        ExperimentKind::Stability => {
            record.error_ratios = error_ratios(points, &record.grid);
            record.stability_fits = stability_fits(points, &record.trials);
        }
        _ => {}
    }
    record
}

fn scaling_fits(grid: &[GridSummary]) -> Vec<ScalingFit> {
    let mut groups: BTreeMap<(usize, usize, usize), Vec<(usize, f64)>> = BTreeMap::new();
    for g in grid {
        if let Some(d) = g.mean_delta {
            groups.entry((g.n, g.p, g.s)).or_default().push((g.m, d));
        }
    }
    groups
        .into_iter()
        .filter_map(|((n, p, s), pts)| {
            let ms: Vec<f64> = pts.iter().map(|q| q.0 as f64).collect();
            let ds: Vec<f64> = pts.iter().map(|q| q.1).collect();
            let (slope, intercept) = stats::log_log_fit(&ms, &ds)?;
            Some(ScalingFit {
                n,
                p,
                s,
                m: pts.iter().map(|q| q.0).collect(),
                mean_delta: ds,
                slope,
                intercept,
            })
        })
        .collect()
}

/// Grid indices grouped by `(n, m, p, s)`, i.e. across noise levels.
fn noise_groups(points: &[GridPoint]) -> BTreeMap<(usize, usize), Vec<usize>> {
    let mut map: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for p in points {
        map.entry((p.cell, p.s)).or_default().push(p.index);
    }
    map
}

fn error_ratios(points: &[GridPoint], grid: &[GridSummary]) -> Vec<ErrorRatio> {
    let mut out = Vec::new();
    for indices in noise_groups(points).values() {
        let mut levels: Vec<&GridSummary> = indices.iter().map(|&i| &grid[i]).collect();
        levels.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon));
        for pair in levels.windows(2) {
            let (lo, hi) = (pair[0], pair[1]);
            if let (Some(a), Some(b)) = (lo.median_error, hi.median_error) {
                if a > 0.0 && lo.epsilon > 0.0 {
                    out.push(ErrorRatio {
                        n: lo.n,
                        m: lo.m,
                        p: lo.p,
                        s: lo.s,
                        epsilon_low: lo.epsilon,
                        epsilon_high: hi.epsilon,
                        median_low: a,
                        median_high: b,
                        ratio: b / a,
                    });
                }
            }
        }
    }
    out
}

fn stability_fits(points: &[GridPoint], trials: &[TrialRecord]) -> Vec<StabilityFit> {
    let mut out = Vec::new();
    for indices in noise_groups(points).values() {
        let rows: Vec<&TrialRecord> = trials
            .iter()
            .filter(|t| indices.contains(&t.grid_index) && t.error_norm.is_some())
            .collect();
        let eps: Vec<f64> = rows.iter().map(|t| t.epsilon).collect();
        let tail: Vec<f64> = rows.iter().map(|t| t.compressibility.unwrap_or(0.0)).collect();
        let err: Vec<f64> = rows.iter().filter_map(|t| t.error_norm).collect();
        if let Some((noise_coef, tail_coef, rms_residual)) = stats::two_term_fit(&eps, &tail, &err) {
            let first = &points[indices[0]];
            out.push(StabilityFit {
                n: first.n,
                m: first.m,
                p: first.p,
                s: first.s,
                noise_coef,
                tail_coef,
                rms_residual,
            });
        }
    }
    out
}

