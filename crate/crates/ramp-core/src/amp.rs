//! The robust approximate-message-passing reconstruction engine.
//!
//! One sweep updates, in order: the Onsager-corrected measurement
//! predictions ω, the residual-variance estimate V (per the selected
//! rule), the per-component effective noise Σ² and pseudo-observations R,
//! and finally the posterior means/variances through the prior's denoiser.
//! The matrix used throughout is the element-wise posterior mean of the
//! true matrix, never the true one.
//!
//! The ω-update divides by the V that produced the current (a, v); the
//! fresh V is then estimated from the residual of the ω just computed, so
//! the denoiser threshold always reflects the current estimate's error.
//! With the standard initialization (a=0, v=ρ, ω=y) the first sweep sends
//! ω to zero and the robust rule boots from V = mean(y²) with no
//! degenerate zero-residual step.
//!
//! With the `parallel` feature the row and column sweeps are chunked
//! across threads; every output element is still reduced in a fixed
//! sequential order, so results are bitwise identical for any thread
//! count.

use alloc::vec::Vec;

use crate::instance::ProblemInstance;
use crate::math;
use crate::matrix::DenseMatrix;
use crate::prior::SignalPrior;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Lower clamp on the residual variance; keeps the ω-update finite in the
/// noiseless perfectly-converged regime.
pub const RESIDUAL_VARIANCE_FLOOR: f64 = 1e-14;

#[cfg(feature = "parallel")]
const COLUMN_CHUNK: usize = 2048;

/// How the per-measurement residual variance is estimated each sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceRule {
    /// Empirical mean of the squared residuals; needs no knowledge of the
    /// noise or the uncertainty level.
    Robust,
    /// Known-noise rule plus the explicit matrix-uncertainty correction
    /// Σ_i (v_i + a_i²) · η / (N(1+η)).
    MatrixUncertainty,
    /// Δ + Σ_i F²_μi v_i per measurement; assumes the noise level is known
    /// and the matrix is trusted.
    KnownNoise,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmpConfig {
    pub rule: VarianceRule,
    pub max_iters: usize,
    /// Convergence threshold on the mean-square change of the estimate.
    pub tol: f64,
    /// Weight of the previous (a, v) blended into each update; 0 is the
    /// plain iteration.
    pub damping: f64,
}

impl Default for AmpConfig {
    fn default() -> Self {
        AmpConfig { rule: VarianceRule::Robust, max_iters: 1000, tol: 1e-12, damping: 0.0 }
    }
}

impl AmpConfig {
    pub fn validate(&self) -> Result<(), AmpError> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(AmpError::InvalidConfig("tol must be finite and > 0"));
        }
        if self.max_iters == 0 {
            return Err(AmpError::InvalidConfig("max_iters must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(AmpError::InvalidConfig("damping must lie in [0, 1)"));
        }
        Ok(())
    }
}

/// Scalar V (robust rule) or per-measurement vector V_μ (the other rules).
#[derive(Debug, Clone, PartialEq)]
pub enum ResidualVariance {
    Uniform(f64),
    PerMeasurement(Vec<f64>),
}

impl ResidualVariance {
    pub fn mean(&self) -> f64 {
        match self {
            ResidualVariance::Uniform(v) => *v,
            ResidualVariance::PerMeasurement(vs) => math::mean(vs),
        }
    }

    fn is_finite(&self) -> bool {
        match self {
            ResidualVariance::Uniform(v) => v.is_finite(),
            ResidualVariance::PerMeasurement(vs) => vs.iter().all(|v| v.is_finite()),
        }
    }

    fn len_ok(&self, m: usize) -> bool {
        match self {
            ResidualVariance::Uniform(_) => true,
            ResidualVariance::PerMeasurement(vs) => vs.len() == m,
        }
    }
}

/// Per-sweep solver state.
#[derive(Debug, Clone, PartialEq)]
pub struct AmpState {
    /// Posterior-mean estimates a_i.
    pub estimate: Vec<f64>,
    /// Posterior variances v_i.
    pub variance: Vec<f64>,
    /// Onsager-corrected measurement predictions ω_μ.
    pub prediction: Vec<f64>,
    /// Residual-variance estimate that produced the current (a, v).
    pub residual_variance: ResidualVariance,
    /// Completed sweeps.
    pub iteration: usize,
}

impl AmpState {
    /// Standard initialization: a = 0, v = ρ·1, ω = y.
    pub fn init(inst: &ProblemInstance, prior: &SignalPrior) -> AmpState {
        let rho = prior.rho();
        AmpState {
            estimate: alloc::vec![0.0; inst.n()],
            variance: alloc::vec![rho; inst.n()],
            prediction: inst.measurements().to_vec(),
            residual_variance: ResidualVariance::Uniform(rho.max(RESIDUAL_VARIANCE_FLOOR)),
            iteration: 0,
        }
    }

    fn all_finite(&self) -> bool {
        self.estimate.iter().all(|x| x.is_finite())
            && self.variance.iter().all(|x| x.is_finite())
            && self.prediction.iter().all(|x| x.is_finite())
            && self.residual_variance.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum AmpError {
    InvalidConfig(&'static str),
    /// State vectors do not match the instance dimensions.
    DimensionMismatch,
    /// Estimate/truth lengths differ.
    LengthMismatch { left: usize, right: usize },
    /// A non-finite intermediate appeared.
    Diverged { iteration: usize, last_mse: Option<f64> },
}

impl core::fmt::Display for AmpError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            AmpError::InvalidConfig(s) => write!(f, "invalid solver config: {s}"),
            AmpError::DimensionMismatch => write!(f, "state does not match instance dimensions"),
            AmpError::LengthMismatch { left, right } => {
                write!(f, "length mismatch: {left} vs {right}")
            }
            AmpError::Diverged { iteration, last_mse } => {
                write!(f, "solver diverged at iteration {iteration}")?;
                if let Some(m) = last_mse {
                    write!(f, " (last finite mse {m:e})")?;
                }
                Ok(())
            }
        }
    }
}

impl core::error::Error for AmpError {}

/// Fused forward sweep: for every row, Σ_i F a_i and Σ_i F² v_i.
fn forward(f: &DenseMatrix, a: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let row_dot = |r: usize| -> (f64, f64) {
        let mut fa = 0.0;
        let mut f2v = 0.0;
        for ((&fv, &ai), &vi) in f.row(r).iter().zip(a).zip(v) {
            fa += fv * ai;
            f2v += fv * fv * vi;
        }
        (fa, f2v)
    };
    #[cfg(feature = "parallel")]
    {
        (0..f.rows()).into_par_iter().map(row_dot).unzip()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..f.rows()).map(row_dot).unzip()
    }
}

/// Column reduction Σ_μ F_μi g_μ.
fn backward(f: &DenseMatrix, g: &[f64]) -> Vec<f64> {
    let mut num = alloc::vec![0.0; f.cols()];
    let fill = |offset: usize, out: &mut [f64]| {
        for (r, &gr) in g.iter().enumerate() {
            let row = &f.row(r)[offset..offset + out.len()];
            for (o, &fv) in out.iter_mut().zip(row) {
                *o += fv * gr;
            }
        }
    };
    #[cfg(feature = "parallel")]
    {
        num.par_chunks_mut(COLUMN_CHUNK)
            .enumerate()
            .for_each(|(ci, out)| fill(ci * COLUMN_CHUNK, out));
    }
    #[cfg(not(feature = "parallel"))]
    fill(0, &mut num);
    num
}

/// Weighted column reductions Σ_μ F_μi g_μ and Σ_μ F²_μi w_μ.
fn backward_weighted(f: &DenseMatrix, g: &[f64], w: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = f.cols();
    let mut num = alloc::vec![0.0; n];
    let mut den = alloc::vec![0.0; n];
    let fill = |offset: usize, num_out: &mut [f64], den_out: &mut [f64]| {
        for r in 0..f.rows() {
            let row = &f.row(r)[offset..offset + num_out.len()];
            let (gr, wr) = (g[r], w[r]);
            for ((no, deo), &fv) in num_out.iter_mut().zip(den_out.iter_mut()).zip(row) {
                *no += fv * gr;
                *deo += fv * fv * wr;
            }
        }
    };
    #[cfg(feature = "parallel")]
    {
        num.par_chunks_mut(COLUMN_CHUNK)
            .zip(den.par_chunks_mut(COLUMN_CHUNK))
            .enumerate()
            .for_each(|(ci, (no, deo))| fill(ci * COLUMN_CHUNK, no, deo));
    }
    #[cfg(not(feature = "parallel"))]
    fill(0, &mut num, &mut den);
    (num, den)
}

/// Prediction update plus the fresh residual-variance estimate.
/// Returns (ω, V, Σ_i F²_μi v_i).
fn sweep_prediction(
    state: &AmpState,
    inst: &ProblemInstance,
    prior: &SignalPrior,
    cfg: &AmpConfig,
) -> (Vec<f64>, ResidualVariance, Vec<f64>) {
    let f = inst.posterior_matrix();
    let y = inst.measurements();
    let (fa, f2v) = forward(f, &state.estimate, &state.variance);
    let mut prediction = fa;
    match &state.residual_variance {
        ResidualVariance::Uniform(v0) => {
            for ((p, &yv), (&om, &sv)) in
                prediction.iter_mut().zip(y).zip(state.prediction.iter().zip(&f2v))
            {
                *p -= (yv - om) / v0 * sv;
            }
        }
        ResidualVariance::PerMeasurement(vs) => {
            for (((p, &yv), (&om, &sv)), &v0) in
                prediction.iter_mut().zip(y).zip(state.prediction.iter().zip(&f2v)).zip(vs)
            {
                *p -= (yv - om) / v0 * sv;
            }
        }
    }
    let delta = inst.noise().delta();
    let residual_variance = match cfg.rule {
        VarianceRule::Robust => {
            let v = math::mean_sq_diff(y, &prediction);
            ResidualVariance::Uniform(v.max(RESIDUAL_VARIANCE_FLOOR))
        }
        VarianceRule::KnownNoise => ResidualVariance::PerMeasurement(
            f2v.iter().map(|&sv| (delta + sv).max(RESIDUAL_VARIANCE_FLOOR)).collect(),
        ),
        VarianceRule::MatrixUncertainty => {
            let d = inst.noise().info_loss();
            let corr = d / inst.n() as f64
                * state
                    .estimate
                    .iter()
                    .zip(&state.variance)
                    .map(|(&a, &v)| v + a * a)
                    .sum::<f64>();
            ResidualVariance::PerMeasurement(
                f2v.iter().map(|&sv| (delta + sv + corr).max(RESIDUAL_VARIANCE_FLOOR)).collect(),
            )
        }
    };
    let _ = prior;
    (prediction, residual_variance, f2v)
}

/// One full sweep. Consumes the state and returns the advanced one, or a
/// divergence error carrying the sweep index that produced it.
pub fn amp_step(
    state: AmpState,
    inst: &ProblemInstance,
    prior: &SignalPrior,
    cfg: &AmpConfig,
) -> Result<AmpState, AmpError> {
    cfg.validate()?;
    let (n, m) = (inst.n(), inst.m());
    if state.estimate.len() != n
        || state.variance.len() != n
        || state.prediction.len() != m
        || !state.residual_variance.len_ok(m)
    {
        return Err(AmpError::DimensionMismatch);
    }
    let iteration = state.iteration + 1;
    let f = inst.posterior_matrix();
    let y = inst.measurements();

    let (prediction, residual_variance, _f2v) = sweep_prediction(&state, inst, prior, cfg);
    let resid: Vec<f64> = y.iter().zip(&prediction).map(|(&yv, &p)| yv - p).collect();

    // effective per-component noise and pseudo-observations
    let (sigma2, r): (Vec<f64>, Vec<f64>) = match &residual_variance {
        ResidualVariance::Uniform(v) => {
            let num = backward(f, &resid);
            let colsq = inst.column_sq_norms();
            (0..n)
                .map(|i| (v / colsq[i], state.estimate[i] + num[i] / colsq[i]))
                .unzip()
        }
        ResidualVariance::PerMeasurement(vs) => {
            let w: Vec<f64> = vs.iter().map(|&v| 1.0 / v).collect();
            let gw: Vec<f64> = resid.iter().zip(&w).map(|(&g, &wv)| g * wv).collect();
            let (num, den) = backward_weighted(f, &gw, &w);
            (0..n)
                .map(|i| {
                    let s2 = 1.0 / den[i];
                    (s2, state.estimate[i] + num[i] * s2)
                })
                .unzip()
        }
    };

    let mut estimate = Vec::with_capacity(n);
    let mut variance = Vec::with_capacity(n);
    let keep = cfg.damping;
    for i in 0..n {
        let d = prior
            .denoise(sigma2[i], r[i])
            .map_err(|_| AmpError::Diverged { iteration, last_mse: None })?;
        estimate.push(keep * state.estimate[i] + (1.0 - keep) * d.mean);
        variance.push(keep * state.variance[i] + (1.0 - keep) * d.variance);
    }

    let next = AmpState { estimate, variance, prediction, residual_variance, iteration };
    if !next.all_finite() {
        return Err(AmpError::Diverged { iteration, last_mse: None });
    }
    Ok(next)
}

/// Mean squared error Σ_i (truth_i − estimate_i)² / N.
pub fn compute_mse(estimate: &[f64], truth: &[f64]) -> Result<f64, AmpError> {
    if estimate.len() != truth.len() {
        return Err(AmpError::LengthMismatch { left: estimate.len(), right: truth.len() });
    }
    Ok(math::mean_sq_diff(estimate, truth))
}

/// Per-run instrumentation.
///
/// Row t describes the t-th estimate: its MSE against the truth (when one
/// was supplied), the residual-variance estimate formed from that
/// estimate's own residual, and the mean-square step size. Rows align
/// index-by-index with density-evolution trajectories.
#[derive(Debug, Clone)]
pub struct AmpReport {
    pub mse_per_iter: Vec<f64>,
    pub v_mean_per_iter: Vec<f64>,
    pub delta_a_per_iter: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub final_estimate: Vec<f64>,
}

/// Iterate until the mean-square change of the estimate drops below
/// `cfg.tol` or `cfg.max_iters` sweeps have run.
pub fn amp_run(
    inst: &ProblemInstance,
    prior: &SignalPrior,
    cfg: &AmpConfig,
    truth: Option<&[f64]>,
) -> Result<AmpReport, AmpError> {
    cfg.validate()?;
    if let Some(t) = truth {
        if t.len() != inst.n() {
            return Err(AmpError::LengthMismatch { left: t.len(), right: inst.n() });
        }
    }
    let mut state = AmpState::init(inst, prior);
    let mut mse_per_iter = Vec::new();
    let mut v_mean_per_iter = Vec::new();
    let mut delta_a_per_iter = Vec::new();
    let mut converged = false;
    let mut prev = state.estimate.clone();

    for t in 1..=cfg.max_iters {
        state = match amp_step(state, inst, prior, cfg) {
            Ok(s) => s,
            Err(AmpError::Diverged { iteration, .. }) => {
                return Err(AmpError::Diverged { iteration, last_mse: mse_per_iter.last().copied() })
            }
            Err(e) => return Err(e),
        };
        if t >= 2 {
            // the V just estimated belongs to the previous row's estimate
            v_mean_per_iter.push(state.residual_variance.mean());
        }
        if let Some(tr) = truth {
            mse_per_iter.push(compute_mse(&state.estimate, tr)?);
        }
        let delta = math::mean_sq_diff(&state.estimate, &prev);
        delta_a_per_iter.push(delta);
        prev.copy_from_slice(&state.estimate);
        if delta < cfg.tol {
            converged = true;
            break;
        }
    }

    // close the books: the final row's V comes from the final estimate's
    // own residual
    let (_, vfinal, _) = sweep_prediction(&state, inst, prior, cfg);
    v_mean_per_iter.push(vfinal.mean());

    Ok(AmpReport {
        mse_per_iter,
        v_mean_per_iter,
        delta_a_per_iter,
        converged,
        iterations: state.iteration,
        final_estimate: state.estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{generate, NoiseModel};

    fn small(rho: f64, seed: u64) -> crate::instance::ProblemInstance {
        generate(32, 0.5, SignalPrior::new(rho).unwrap(), NoiseModel::new(1e-8, 1e-4).unwrap(), seed)
            .unwrap()
    }

    #[test]
    fn zero_instance_is_fixed_point() {
        // rho > 0 but the planted signal and measurements are all zero
        let prior = SignalPrior::new(0.3).unwrap();
        let zero_prior = SignalPrior::new(0.0).unwrap();
        let inst = generate(16, 0.5, zero_prior, NoiseModel::new(0.0, 0.0).unwrap(), 3).unwrap();
        let state = AmpState::init(&inst, &prior);
        let cfg = AmpConfig::default();
        let s1 = amp_step(state, &inst, &prior, &cfg).unwrap();
        assert!(s1.prediction.iter().all(|&w| w == 0.0));
        assert!(s1.estimate.iter().all(|&a| a == 0.0));
        let s2 = amp_step(s1, &inst, &prior, &cfg).unwrap();
        assert!(s2.estimate.iter().all(|&a| a == 0.0));
    }

    #[test]
    fn report_rows_align() {
        let inst = small(0.2, 1);
        let prior = *inst.prior();
        let cfg = AmpConfig { max_iters: 7, tol: 1e-300, ..Default::default() };
        let rep = amp_run(&inst, &prior, &cfg, Some(inst.signal())).unwrap();
        assert_eq!(rep.iterations, 7);
        assert_eq!(rep.mse_per_iter.len(), 7);
        assert_eq!(rep.v_mean_per_iter.len(), 7);
        assert_eq!(rep.delta_a_per_iter.len(), 7);
        assert!(!rep.converged);
    }

    #[test]
    fn mse_examples() {
        let x = [1.0, 2.0, 3.0];
        assert_eq!(compute_mse(&x, &x).unwrap(), 0.0);
        assert_eq!(compute_mse(&[1.0, 2.0, 0.0], &[1.0, 2.0, 3.0]).unwrap(), 3.0);
        assert!(compute_mse(&x, &[1.0]).is_err());
        // zero estimate against a planted signal has mse close to rho
        let s = SignalPrior::new(0.3).unwrap().sample_signal(100_000, 5);
        let z = alloc::vec![0.0; s.len()];
        let mse = compute_mse(&z, &s).unwrap();
        assert!((mse - 0.3).abs() < 0.01, "mse {mse}");
    }

    #[test]
    fn config_validation() {
        let bad = AmpConfig { tol: 0.0, ..Default::default() };
        assert!(matches!(bad.validate(), Err(AmpError::InvalidConfig(_))));
        let bad = AmpConfig { max_iters: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = AmpConfig { damping: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn dimension_mismatch_detected() {
        let inst = small(0.2, 1);
        let other = small(0.2, 2);
        let prior = *inst.prior();
        let mut state = AmpState::init(&inst, &prior);
        state.estimate.pop();
        assert!(matches!(
            amp_step(state, &other, &prior, &AmpConfig::default()),
            Err(AmpError::DimensionMismatch)
        ));
    }
}
