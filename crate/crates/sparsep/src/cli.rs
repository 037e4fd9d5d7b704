//! The `sparsep` command line.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{self, File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sparsep_core::channels::support_of;
use sparsep_core::rng::{stream_rng, STREAM_NOISE, STREAM_SIGNAL};
use sparsep_core::solvers::relative_error;
use sparsep_core::{
    build_dense_folded, build_dense_linear, fold_apply, generate_probes, noise_with_norm,
    solve_bpdn, solve_iht, solve_oracle_ls, ChannelSet, FoldMap, LinearOperator,
    MeasurementOperator, ProbeSet, ProblemDims, RecoveryResult, SolverConfig, StepMode, Variant,
    DEFAULT_DENSE_LIMIT,
};

use crate::error::{Error, Result};
use crate::experiments::{
    run_experiment_resumable, write_trials_csv, ExperimentConfig, GridOutcome, RunOptions,
};
use crate::io::{self, VectorHeader, VectorKind};
use crate::manifest::{config_hash, RunManifest};

/// Environment variable overriding the dense and enumeration budgets.
pub const WORK_LIMIT_ENV: &str = "SPARSEP_WORK_LIMIT";

const EXIT_CODES: &str = "Exit codes:
  0  success
  2  usage or validation error (bad flags, invalid dimensions, malformed or mismatched files)
  3  I/O error (unreadable input, unwritable output)
  4  non-convergence: the solver hit max_iter (outputs are still written)

Environment:
  SPARSEP_WORK_LIMIT  overrides the dense-matrix and support-enumeration budgets";

#[derive(Debug, Parser)]
#[command(name = "sparsep", version, about = "Sparse multichannel separation with random probes", after_help = EXIT_CODES)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a random probe ensemble and write it to a file.
    GenProbes(GenProbesArgs),
    /// Superpose channel responses under a probe set, optionally with noise.
    Simulate(SimulateArgs),
    /// Recover channel responses from measurements.
    Recover(RecoverArgs),
    /// Run a Monte Carlo experiment from a JSON config.
    Experiment(ExperimentArgs),
    /// Write the dense measurement matrix of a probe file as CSV.
    ExportMatrix(ExportMatrixArgs),
}

#[derive(Debug, Args)]
pub struct GenProbesArgs {
    /// Channel length.
    #[arg(long)]
    pub n: usize,
    /// Probe length.
    #[arg(long)]
    pub m: usize,
    /// Number of sources.
    #[arg(long)]
    pub p: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub probes: PathBuf,
    /// Channel file to use as the true response.
    #[arg(long, conflicts_with = "random_sparse", required_unless_present = "random_sparse")]
    pub channels: Option<PathBuf>,
    /// Draw an s-sparse channel vector instead of reading one.
    #[arg(long, value_name = "S")]
    pub random_sparse: Option<usize>,
    /// Seed for the random channel and the noise.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Add noise of exactly this l2 norm to the linear measurements.
    #[arg(long, default_value_t = 0.0)]
    pub noise_eps: f64,
    /// Linear-convolution measurements (length m+n-1).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the folded measurements (length m).
    #[arg(long)]
    pub folded_out: Option<PathBuf>,
    /// Also write the channel vector used.
    #[arg(long)]
    pub channels_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Bpdn,
    Iht,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StepArg {
    Fixed,
    Adaptive,
}

#[derive(Debug, Args)]
pub struct RecoverArgs {
    #[arg(long)]
    pub probes: PathBuf,
    #[arg(long)]
    pub measurements: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Bpdn)]
    pub method: MethodArg,
    /// Noise budget; defaults to the value recorded in the measurement file.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Sparsity kept by IHT.
    #[arg(long)]
    pub sparsity: Option<usize>,
    /// Oracle support as 1-based comma-separated indices.
    #[arg(long, value_delimiter = ',', conflicts_with = "support_from")]
    pub support: Option<Vec<usize>>,
    /// Take the oracle support from the nonzeros of a channel file.
    #[arg(long)]
    pub support_from: Option<PathBuf>,
    /// Channel file to report the relative error against.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub feas_tol: Option<f64>,
    #[arg(long)]
    pub opt_tol: Option<f64>,
    #[arg(long, value_enum)]
    pub step: Option<StepArg>,
    /// Recovery result as JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Estimated channel vector.
    #[arg(long)]
    pub x_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Worker threads (0 = all cores).
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Skip grid points already checkpointed by a run with the same config.
    #[arg(long)]
    pub resume: bool,
    /// Append a wall_time column to trials.csv (makes it run-dependent).
    #[arg(long)]
    pub csv_timing: bool,
}

#[derive(Debug, Args)]
pub struct ExportMatrixArgs {
    #[arg(long)]
    pub probes: PathBuf,
    #[arg(long, value_enum, default_value_t = VariantArg::Folded)]
    pub variant: VariantArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Linear,
    Folded,
}

/// Written by `recover --out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub format_version: String,
    pub kind: String,
    pub n: usize,
    pub m: usize,
    pub p: usize,
    pub variant: Variant,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relative_error: Option<f64>,
    pub result: RecoveryResult,
}

/// Parses arguments and runs a command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::GenProbes(a) => cmd_gen_probes(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Recover(a) => cmd_recover(&a),
        Command::Experiment(a) => cmd_experiment(&a),
        Command::ExportMatrix(a) => cmd_export_matrix(&a),
    }
}

/// Budget override from the environment; accepts integers or floats like `1e9`.
pub fn work_limit_from_env() -> Result<Option<u64>> {
    match std::env::var(WORK_LIMIT_ENV) {
        Ok(text) => {
            let v: f64 = text
                .trim()
                .parse()
                .map_err(|_| Error::Usage(format!("{WORK_LIMIT_ENV}={text:?} is not a number")))?;
            if !(v.is_finite() && v >= 1.0) {
                return Err(Error::Usage(format!("{WORK_LIMIT_ENV} must be a positive number")));
            }
            Ok(Some(v as u64))
        }
        Err(_) => Ok(None),
    }
}

pub fn cmd_gen_probes(a: &GenProbesArgs) -> Result<()> {
    let dims = ProblemDims::new(a.n, a.m, a.p)?;
    let probes = generate_probes(dims, a.seed)?;
    io::write_probes(&a.out, &probes)?;
    let energies = probes.energies();
    let mean = energies.iter().sum::<f64>() / energies.len() as f64;
    let min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let max = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    println!("wrote {} (n={}, m={}, p={}, seed={})", a.out.display(), dims.n, dims.m, dims.p, a.seed);
    println!("probe energy: mean {mean:.6}, min {min:.6}, max {max:.6}");
    Ok(())
}

fn read_channels(path: &Path, dims: &ProblemDims) -> Result<Vec<f64>> {
    let (header, h) = io::read_vector(path)?;
    if header.kind != VectorKind::Channels {
        return Err(Error::Usage(format!("{} is not a channel file", path.display())));
    }
    check_dims(path, &header, dims)?;
    Ok(h)
}

fn check_dims(path: &Path, header: &VectorHeader, dims: &ProblemDims) -> Result<()> {
    if (header.n, header.m, header.p) != (dims.n, dims.m, dims.p) {
        return Err(Error::Usage(format!(
            "{}: dimensions (n={}, m={}, p={}) do not match the probes (n={}, m={}, p={})",
            path.display(),
            header.n,
            header.m,
            header.p,
            dims.n,
            dims.m,
            dims.p
        )));
    }
    Ok(())
}

pub fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    if !(a.noise_eps >= 0.0 && a.noise_eps.is_finite()) {
        return Err(Error::Usage("--noise-eps must be finite and >= 0".into()));
    }
    let probes = io::read_probes(&a.probes)?;
    let dims = *probes.dims();
    let h = match (&a.channels, a.random_sparse) {
        (Some(path), _) => read_channels(path, &dims)?,
        (None, Some(s)) => {
            let mut rng = stream_rng(a.seed, STREAM_SIGNAL);
            ChannelSet::random_sparse(dims, s, &mut rng)?.h
        }
        (None, None) => return Err(Error::Usage("one of --channels or --random-sparse is required".into())),
    };
    let op = MeasurementOperator::linear(&probes);
    let mut y = op.apply(&h)?;
    let noise = noise_with_norm(y.len(), a.noise_eps, &mut stream_rng(a.seed, STREAM_NOISE));
    for (yi, ei) in y.iter_mut().zip(noise) {
        *yi += ei;
    }
    let header = VectorHeader::new(VectorKind::Measurements, &dims)
        .with_variant(Variant::Linear)
        .with_epsilon(a.noise_eps);
    io::write_vector(&a.out, &header, &y)?;
    println!("wrote {} ({} linear measurements, noise norm {})", a.out.display(), y.len(), a.noise_eps);
    if let Some(path) = &a.folded_out {
        let folded = fold_apply(&FoldMap::from_dims(&dims), &y)?;
        // folding at most doubles the noise energy
        let header = VectorHeader::new(VectorKind::Measurements, &dims)
            .with_variant(Variant::Folded)
            .with_epsilon(a.noise_eps * std::f64::consts::SQRT_2);
        io::write_vector(path, &header, &folded)?;
        println!("wrote {} ({} folded measurements)", path.display(), folded.len());
    }
    if let Some(path) = &a.channels_out {
        io::write_vector(path, &VectorHeader::new(VectorKind::Channels, &dims), &h)?;
        println!("wrote {} ({} nonzeros)", path.display(), support_of(&h).len());
    }
    Ok(())
}

fn solver_config(a: &RecoverArgs, epsilon: f64) -> SolverConfig {
    let mut cfg = SolverConfig::default().with_epsilon(epsilon);
    if let Some(v) = a.max_iter {
        cfg.max_iter = v;
    }
    if let Some(v) = a.feas_tol {
        cfg.feas_tol = v;
    }
    if let Some(v) = a.opt_tol {
        cfg.opt_tol = v;
    }
    if let Some(s) = a.sparsity {
        cfg.s_target = s;
    }
    if let Some(step) = a.step {
        cfg.step_mode = match step {
            StepArg::Fixed => StepMode::Fixed,
            StepArg::Adaptive => StepMode::Adaptive,
        };
    }
    cfg
}

fn oracle_support(a: &RecoverArgs, dims: &ProblemDims) -> Result<Vec<usize>> {
    if let Some(list) = &a.support {
        let len = dims.input_len();
        return list
            .iter()
            .map(|&i| {
                if i == 0 || i > len {
                    Err(Error::Usage(format!("support index {i} outside 1..={len}")))
                } else {
                    Ok(i - 1)
                }
            })
            .collect();
    }
    if let Some(path) = &a.support_from {
        return Ok(support_of(&read_channels(path, dims)?));
    }
    Err(Error::Usage("--method oracle needs --support or --support-from".into()))
}

pub fn cmd_recover(a: &RecoverArgs) -> Result<()> {
    let probes = io::read_probes(&a.probes)?;
    let dims = *probes.dims();
    let (header, y) = io::read_vector(&a.measurements)?;
    if header.kind != VectorKind::Measurements {
        return Err(Error::Usage(format!("{} is not a measurement file", a.measurements.display())));
    }
    check_dims(&a.measurements, &header, &dims)?;
    let variant = header.variant.unwrap_or(Variant::Linear);
    let epsilon = a.epsilon.or(header.epsilon).unwrap_or(0.0);
    let cfg = solver_config(a, epsilon);
    let op = MeasurementOperator::new(&probes, variant);
    let result = match a.method {
        MethodArg::Bpdn => solve_bpdn(&op, &y, &cfg)?,
        MethodArg::Iht => {
            if a.sparsity.is_none() {
                return Err(Error::Usage("--method iht needs --sparsity".into()));
            }
            solve_iht(&op, &y, &cfg)?
        }
        MethodArg::Oracle => solve_oracle_ls(&op, &y, &oracle_support(a, &dims)?)?,
    };
    let rel = match &a.truth {
        Some(path) => Some(relative_error(&result.x_hat, &read_channels(path, &dims)?)),
        None => None,
    };
    let report = RecoveryReport {
        format_version: io::FORMAT_VERSION.to_string(),
        kind: "recovery".into(),
        n: dims.n,
        m: dims.m,
        p: dims.p,
        variant,
        epsilon,
        relative_error: rel,
        result,
    };
    io::write_json(&a.out, &report)?;
    if let Some(path) = &a.x_out {
        io::write_vector(path, &VectorHeader::new(VectorKind::Estimate, &dims), &report.result.x_hat)?;
    }
    let r = &report.result;
    println!(
        "{}: {} iterations, residual {:.3e}, l1 {:.6}, converged {}",
        r.method.name(), r.iterations, r.residual_norm, r.l1_norm, r.converged
    );
    if let Some(e) = rel {
        println!("relative error {e:.3e}");
    }
    if r.rank_deficient {
        println!("warning: restricted system is rank deficient; minimum-norm solution returned");
    }
    if !r.converged {
        return Err(Error::NotConverged);
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    format_version: String,
    config_hash: String,
}

const CHECKPOINT: &str = "partial.jsonl";

fn load_checkpoint(path: &Path, hash: &str) -> Result<BTreeMap<usize, GridOutcome>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(BTreeMap::new()),
        Err(e) => return Err(Error::io(path, e)),
    };
    let mut lines = text.lines();
    let Some(first) = lines.next() else {
        return Ok(BTreeMap::new());
    };
    let header: CheckpointHeader =
        serde_json::from_str(first).map_err(|e| Error::format(path, 1, e.to_string()))?;
    io::check_version(&header.format_version)?;
    if header.config_hash != hash {
        return Err(Error::Usage(format!(
            "cannot resume: {} was written for config {} but this config hashes to {hash}",
            path.display(),
            header.config_hash
        )));
    }
    let mut done = BTreeMap::new();
    for line in lines {
        // a torn final line from an interrupted run is simply recomputed
        match serde_json::from_str::<GridOutcome>(line) {
            Ok(o) => {
                done.insert(o.summary.grid_index, o);
            }
            Err(_) => break,
        }
    }
    Ok(done)
}

pub fn cmd_experiment(a: &ExperimentArgs) -> Result<()> {
    let text = fs::read_to_string(&a.config).map_err(|e| Error::io(&a.config, e))?;
    let cfg: ExperimentConfig = io::parse_json(&text)?;
    cfg.validate()?;
    let hash = config_hash(&cfg);
    let limit = work_limit_from_env()?;
    let opts = RunOptions {
        threads: a.threads,
        work_limit: limit,
        dense_limit: limit,
    };
    fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    let mut manifest = RunManifest::new("experiment", hash.clone());
    manifest.inputs.push(a.config.display().to_string());

    let checkpoint_path = a.out_dir.join(CHECKPOINT);
    let done = if a.resume {
        load_checkpoint(&checkpoint_path, &hash)?
    } else {
        BTreeMap::new()
    };
    let mut checkpoint = {
        let mut f = OpenOptions::new()
            .create(true)
            .write(true)
            .truncate(true)
            .open(&checkpoint_path)
            .map_err(|e| Error::io(&checkpoint_path, e))?;
        let header = CheckpointHeader {
            format_version: io::FORMAT_VERSION.to_string(),
            config_hash: hash.clone(),
        };
        let mut lines = vec![serde_json::to_string(&header).expect("header")];
        lines.extend(done.values().map(|o| serde_json::to_string(o).expect("outcome")));
        writeln!(f, "{}", lines.join("\n")).map_err(|e| Error::io(&checkpoint_path, e))?;
        f
    };
    if !done.is_empty() {
        println!("resuming: {} grid points already complete", done.len());
    }

    let record = run_experiment_resumable(&cfg, &opts, &done, |outcome| {
        let line = serde_json::to_string(outcome).expect("outcome");
        writeln!(checkpoint, "{line}").map_err(|e| Error::io(&checkpoint_path, e))?;
        checkpoint.flush().map_err(|e| Error::io(&checkpoint_path, e))?;
        let g = &outcome.summary;
        match (&g.error, g.success_rate, g.mean_delta) {
            (Some(err), _, _) => println!("grid {}: skipped ({err})", g.grid_index),
            (None, Some(rate), _) => println!(
                "grid {} (n={}, m={}, p={}, s={}, eps={}): success {:.3} +/- {:.3}",
                g.grid_index, g.n, g.m, g.p, g.s, g.epsilon, rate, g.success_std_error.unwrap_or(0.0)
            ),
            (None, None, Some(delta)) => println!(
                "grid {} (n={}, m={}, p={}, s={}): mean delta {delta:.6}",
                g.grid_index, g.n, g.m, g.p, g.s
            ),
            _ => println!("grid {}: done", g.grid_index),
        }
        Ok(())
    })?;

    let record_path = a.out_dir.join("record.json");
    io::write_json(&record_path, &record)?;
    let csv_path = a.out_dir.join("trials.csv");
    let file = File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    write_trials_csv(BufWriter::new(file), &record.trials, a.csv_timing)?;
    for fit in &record.scaling_fits {
        println!("n={} p={} s={}: log-log slope {:.4}", fit.n, fit.p, fit.s, fit.slope);
    }
    for r in &record.error_ratios {
        println!(
            "n={} m={} p={} s={}: median error ratio {:.3} for eps {} -> {}",
            r.n, r.m, r.p, r.s, r.ratio, r.epsilon_low, r.epsilon_high
        );
    }
    let manifest_path = a.out_dir.join("manifest.json");
    manifest.outputs = vec![
        record_path.display().to_string(),
        csv_path.display().to_string(),
        checkpoint_path.display().to_string(),
    ];
    manifest.finish();
    io::write_json(&manifest_path, &manifest)?;
    println!("wrote {}", a.out_dir.display());
    Ok(())
}

pub fn cmd_export_matrix(a: &ExportMatrixArgs) -> Result<()> {
    let probes: ProbeSet = io::read_probes(&a.probes)?;
    let limit = work_limit_from_env()?.unwrap_or(DEFAULT_DENSE_LIMIT);
    let dense = match a.variant {
        VariantArg::Linear => build_dense_linear(&probes, limit)?,
        VariantArg::Folded => build_dense_folded(&probes, limit)?,
    };
    io::write_matrix(&a.out, &dense)?;
    println!("wrote {} ({} x {})", a.out.display(), dense.nrows(), dense.ncols());
    Ok(())
}
