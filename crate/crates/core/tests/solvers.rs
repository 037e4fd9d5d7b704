use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use sparsep_core::rng::{stream_rng, STREAM_NOISE, STREAM_SIGNAL};
use sparsep_core::solvers::relative_error;
use sparsep_core::{
    build_dense_folded, build_dense_linear, generate_probes, reference_bpdn, solve_bpdn, solve_iht,
    solve_oracle_ls, ChannelSet, LinearOperator, MeasurementOperator, ProblemDims, SolverConfig,
    DEFAULT_DENSE_LIMIT,
};

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn noise(len: usize, eps: f64, seed: u64) -> Vec<f64> {
    let mut rng = stream_rng(seed, STREAM_NOISE);
    let v: Vec<f64> = (0..len).map(|_| StandardNormal.sample(&mut rng)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x * eps / norm).collect()
}

#[test]
fn bpdn_agrees_with_reference_on_noisy_instances() {
    let dims = ProblemDims::new(4, 6, 3).unwrap();
    for seed in 0..10 {
        let pr = generate_probes(dims, seed).unwrap();
        let op = MeasurementOperator::folded(&pr);
        let mut rng = stream_rng(seed, STREAM_SIGNAL);
        let h = ChannelSet::random_sparse(dims, 2, &mut rng).unwrap();
        let clean = op.apply(&h.h).unwrap();
        let eps = 0.05;
        let y: Vec<f64> = clean.iter().zip(noise(6, eps, seed)).map(|(a, b)| a + b).collect();
        let cfg = SolverConfig::default().with_epsilon(eps);
        let fast = solve_bpdn(&op, &y, &cfg).unwrap();
        let dense = build_dense_folded(&pr, DEFAULT_DENSE_LIMIT).unwrap();
        let slow = reference_bpdn(&dense, &y, eps).unwrap();
        assert!(fast.converged);
        let (a, b) = (fast.l1_norm, l1(&slow));
        assert!((a - b).abs() <= 1e-4 * b, "seed {seed}: {a} vs {b}");
        // the true channel is feasible, so the minimizer cannot have larger l1 norm
        assert!(a <= l1(&h.h) + cfg.opt_tol * (1.0 + l1(&h.h)));
    }
}

#[test]
fn bpdn_exact_recovery_tiny() {
    let dims = ProblemDims::new(3, 6, 2).unwrap();
    let mut checked = 0;
    for seed in 0..20 {
        let pr = generate_probes(dims, seed).unwrap();
        let op = MeasurementOperator::folded(&pr);
        let mut rng = stream_rng(seed, STREAM_SIGNAL);
        let h = ChannelSet::random_sparse(dims, 1, &mut rng).unwrap();
        let y = op.apply(&h.h).unwrap();
        let dense = build_dense_folded(&pr, DEFAULT_DENSE_LIMIT).unwrap();
        let oracle = reference_bpdn(&dense, &y, 0.0).unwrap();
        if relative_error(&oracle, &h.h) > 1e-4 {
            continue;
        }
        checked += 1;
        let out = solve_bpdn(&op, &y, &SolverConfig::default()).unwrap();
        assert!(relative_error(&out.x_hat, &h.h) <= 1e-5, "seed {seed}");
        assert!((out.l1_norm - l1(&oracle)).abs() <= 1e-4 * l1(&oracle));
    }
    assert!(checked >= 10);
}

#[test]
fn iht_recovers_screened_instances() {
    let dims = ProblemDims::new(8, 24, 2).unwrap();
    let mut successes = 0;
    for seed in 0..10 {
        let pr = generate_probes(dims, seed).unwrap();
        let op = MeasurementOperator::folded(&pr);
        let mut rng = stream_rng(seed, STREAM_SIGNAL);
        let h = ChannelSet::random_sparse(dims, 2, &mut rng).unwrap();
        let y = op.apply(&h.h).unwrap();
        let screened = solve_oracle_ls(&op, &y, h.support.as_ref().unwrap()).unwrap();
        assert!(relative_error(&screened.x_hat, &h.h) < 1e-10);
        let cfg = SolverConfig::default().with_sparsity(2);
        let out = solve_iht(&op, &y, &cfg).unwrap();
        assert!(out.x_hat.iter().filter(|v| **v != 0.0).count() <= 2);
        if relative_error(&out.x_hat, &h.h) <= 1e-5 {
            successes += 1;
        }
    }
    assert!(successes >= 9, "IHT recovered {successes}/10");
}

#[test]
fn oracle_ls_beats_bpdn_usually() {
    let dims = ProblemDims::new(8, 24, 2).unwrap();
    let mut wins = 0;
    let trials = 100;
    for seed in 0..trials {
        let pr = generate_probes(dims, seed).unwrap();
        let op = MeasurementOperator::folded(&pr);
        let mut rng = stream_rng(seed, STREAM_SIGNAL);
        let h = ChannelSet::random_sparse(dims, 3, &mut rng).unwrap();
        let eps = 0.05;
        let y: Vec<f64> = op
            .apply(&h.h)
            .unwrap()
            .iter()
            .zip(noise(24, eps, seed))
            .map(|(a, b)| a + b)
            .collect();
        let ls = solve_oracle_ls(&op, &y, h.support.as_ref().unwrap()).unwrap();
        let bp = solve_bpdn(&op, &y, &SolverConfig::default().with_epsilon(eps)).unwrap();
        if relative_error(&ls.x_hat, &h.h) <= relative_error(&bp.x_hat, &h.h) {
            wins += 1;
        }
    }
    assert!(wins >= 90, "oracle LS better in {wins}/{trials}");
}

#[test]
fn linear_and_folded_bpdn_agree_noiseless() {
    let dims = ProblemDims::new(8, 24, 4).unwrap();
    for seed in 0..5 {
        let pr = generate_probes(dims, seed).unwrap();
        let mut rng = stream_rng(seed, STREAM_SIGNAL);
        let h = ChannelSet::random_sparse(dims, 2, &mut rng).unwrap();
        let lin = MeasurementOperator::linear(&pr);
        let fol = MeasurementOperator::folded(&pr);
        let a = solve_bpdn(&lin, &lin.apply(&h.h).unwrap(), &SolverConfig::default()).unwrap();
        let b = solve_bpdn(&fol, &fol.apply(&h.h).unwrap(), &SolverConfig::default()).unwrap();
        assert!(relative_error(&a.x_hat, &b.x_hat) < 1e-5);
    }
}

#[test]
fn bpdn_is_feasible_on_dense_operator() {
    let dims = ProblemDims::new(4, 8, 3).unwrap();
    let pr = generate_probes(dims, 9).unwrap();
    let dense = build_dense_linear(&pr, DEFAULT_DENSE_LIMIT).unwrap();
    let op = sparsep_core::operators::DenseOperator(dense.clone());
    let y: Vec<f64> = (0..11).map(|i| (i as f64).sin()).collect();
    for eps in [0.1, 0.5, 1.0] {
        let out = solve_bpdn(&op, &y, &SolverConfig::default().with_epsilon(eps)).unwrap();
        assert!(out.residual_norm <= eps * (1.0 + 1e-6));
        let slow = reference_bpdn(&dense, &y, eps).unwrap();
        assert!((out.l1_norm - l1(&slow)).abs() <= 1e-4 * l1(&slow));
    }
    // the reference rejects an empty constraint set
    let tall = DMatrix::from_row_slice(3, 1, &[1.0, 0.0, 0.0]);
    assert!(reference_bpdn(&tall, &[0.0, 1.0, 0.0], 0.5).is_err());
}

#[test]
fn bpdn_agrees_with_reference_when_active_set_fills_the_output() {
    // m = 5 rows, 16 columns: the path ends with m active columns
    let dims = ProblemDims::new(2, 5, 8).unwrap();
    for seed in 0..80 {
        let pr = generate_probes(dims, seed).unwrap();
        let op = MeasurementOperator::folded(&pr);
        let mut rng = stream_rng(seed, STREAM_SIGNAL);
        let h = ChannelSet::random_sparse(dims, 2, &mut rng).unwrap();
        let y = op.apply(&h.h).unwrap();
        let fast = solve_bpdn(&op, &y, &SolverConfig::default()).unwrap();
        let dense = build_dense_folded(&pr, DEFAULT_DENSE_LIMIT).unwrap();
        let slow = reference_bpdn(&dense, &y, 0.0).unwrap();
        assert!(fast.converged, "seed {seed}");
        let (a, b) = (fast.l1_norm, l1(&slow));
        assert!((a - b).abs() <= 1e-6 * b, "seed {seed}: {a} vs {b}");
    }
}
