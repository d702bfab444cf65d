//! The vectorized solver against the scalar-loop transcription, and the
//! structural solver properties (permutation equivariance, divergence
//! reporting, report/trajectory conventions).

use ramp_core::amp::{amp_run, amp_step, AmpConfig, AmpState, VarianceRule};
use ramp_core::instance::{generate, NoiseModel, ProblemInstance};
use ramp_core::matrix::DenseMatrix;
use ramp_core::prior::SignalPrior;
use ramp_core::reference::amp_step_reference;

fn fixture(n: usize, alpha: f64, seed: u64) -> ProblemInstance {
    generate(
        n,
        alpha,
        SignalPrior::new(0.25).unwrap(),
        NoiseModel::new(1e-6, 1e-3).unwrap(),
        seed,
    )
    .unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn assert_states_close(a: &AmpState, b: &AmpState, tol: f64, ctx: &str) {
    assert!(max_abs_diff(&a.estimate, &b.estimate) < tol, "{ctx}: estimate");
    assert!(max_abs_diff(&a.variance, &b.variance) < tol, "{ctx}: variance");
    assert!(max_abs_diff(&a.prediction, &b.prediction) < tol, "{ctx}: prediction");
    let va = a.residual_variance.mean();
    let vb = b.residual_variance.mean();
    assert!((va - vb).abs() < tol, "{ctx}: residual variance {va} vs {vb}");
}

#[test]
fn engine_matches_scalar_transcription() {
    for rule in [VarianceRule::Robust, VarianceRule::MatrixUncertainty, VarianceRule::KnownNoise] {
        let cfg = AmpConfig { rule, ..Default::default() };
        for (n, alpha) in [(16, 0.5), (64, 0.5)] {
            for seed in 0..10u64 {
                let inst = fixture(n, alpha, seed);
                let prior = *inst.prior();
                let mut engine = AmpState::init(&inst, &prior);
                for step in 0..3 {
                    let reference = amp_step_reference(&engine, &inst, &prior, &cfg).unwrap();
                    engine = amp_step(engine, &inst, &prior, &cfg).unwrap();
                    assert_states_close(
                        &engine,
                        &reference,
                        1e-12,
                        &format!("rule {rule:?} n={n} seed={seed} step={step}"),
                    );
                    // both paths continue from the engine state
                }
            }
        }
    }
}

#[test]
fn damping_blends_linearly() {
    let inst = fixture(32, 0.5, 3);
    let prior = *inst.prior();
    let plain = amp_step(AmpState::init(&inst, &prior), &inst, &prior, &AmpConfig::default())
        .unwrap();
    let damped = amp_step(
        AmpState::init(&inst, &prior),
        &inst,
        &prior,
        &AmpConfig { damping: 0.25, ..Default::default() },
    )
    .unwrap();
    let init = AmpState::init(&inst, &prior);
    for i in 0..inst.n() {
        let expect = 0.25 * init.estimate[i] + 0.75 * plain.estimate[i];
        assert!((damped.estimate[i] - expect).abs() < 1e-14);
    }
}

#[test]
fn permutation_equivariance() {
    let inst = fixture(24, 0.75, 9);
    let prior = *inst.prior();
    let (m, n) = (inst.m(), inst.n());
    // reversal permutation of signal indices and matrix columns
    let perm: Vec<usize> = (0..n).rev().collect();
    let permute = |mat: &DenseMatrix| {
        let mut data = Vec::with_capacity(m * n);
        for r in 0..m {
            let row = mat.row(r);
            for &j in &perm {
                data.push(row[j]);
            }
        }
        DenseMatrix::from_vec(m, n, data).unwrap()
    };
    let signal: Vec<f64> = perm.iter().map(|&j| inst.signal()[j]).collect();
    let permuted = ProblemInstance::from_parts(
        permute(inst.true_matrix()),
        permute(inst.observed_matrix()),
        signal,
        inst.measurements().to_vec(),
        *inst.noise(),
        prior,
        inst.seed(),
    )
    .unwrap();

    let cfg = AmpConfig { max_iters: 6, tol: 1e-300, ..Default::default() };
    let a = amp_run(&inst, &prior, &cfg, None).unwrap();
    let b = amp_run(&permuted, &prior, &cfg, None).unwrap();
    // permuting columns reorders the row reductions, so agreement is up to
    // float rounding, not bitwise
    for (i, &j) in perm.iter().enumerate() {
        assert!((a.final_estimate[j] - b.final_estimate[i]).abs() < 1e-12);
    }
}

#[test]
fn divergence_carries_iteration_and_last_mse() {
    // a poisoned instance (non-finite measurement) must surface as a
    // divergence error, not a panic or a silent NaN
    let inst = fixture(16, 0.5, 1);
    let prior = *inst.prior();
    let mut measurements = inst.measurements().to_vec();
    measurements[0] = f64::NAN;
    let poisoned = ProblemInstance::from_parts(
        inst.true_matrix().clone(),
        inst.observed_matrix().clone(),
        inst.signal().to_vec(),
        measurements,
        *inst.noise(),
        prior,
        inst.seed(),
    )
    .unwrap();
    let err = amp_run(&poisoned, &prior, &AmpConfig::default(), Some(poisoned.signal()))
        .unwrap_err();
    match err {
        ramp_core::amp::AmpError::Diverged { iteration, .. } => assert!(iteration >= 1),
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn deterministic_across_runs() {
    let inst = fixture(48, 0.5, 2);
    let prior = *inst.prior();
    let cfg = AmpConfig { max_iters: 10, tol: 1e-300, ..Default::default() };
    let a = amp_run(&inst, &prior, &cfg, Some(inst.signal())).unwrap();
    let b = amp_run(&inst, &prior, &cfg, Some(inst.signal())).unwrap();
    assert_eq!(a.final_estimate, b.final_estimate);
    assert_eq!(a.mse_per_iter, b.mse_per_iter);
    assert_eq!(a.v_mean_per_iter, b.v_mean_per_iter);
}
