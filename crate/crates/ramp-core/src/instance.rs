//! Synthetic problem instances.
//!
//! An instance holds the true measurement matrix (iid entries of variance
//! 1/N), the corrupted version of it the experimenter actually observes,
//! the rescaled element-wise posterior-mean matrix the solver sweeps, the
//! planted signal and the noisy measurements.
//!
//! Reproducibility: all randomness flows from one ChaCha8 generator seeded
//! with `seed_from_u64(seed)`, with one documented substream per object —
//! stream 0 for the true matrix, 1 for the matrix corruption, 2 for the
//! measurement noise, 3 for the signal. Generation is single-threaded so
//! the draw order is part of the contract.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::math;
use crate::matrix::DenseMatrix;
use crate::prior::SignalPrior;

/// Measurement-noise variance Δ and matrix-uncertainty level η.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    delta: f64,
    eta: f64,
}

impl NoiseModel {
    pub fn new(delta: f64, eta: f64) -> Result<Self, InstanceError> {
        if !delta.is_finite() || delta < 0.0 {
            return Err(InstanceError::InvalidNoise("delta must be finite and >= 0"));
        }
        if !eta.is_finite() || eta < 0.0 {
            return Err(InstanceError::InvalidNoise("eta must be finite and >= 0"));
        }
        Ok(NoiseModel { delta, eta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Share of matrix information lost to uncertainty, η/(1+η) ∈ [0, 1).
    pub fn info_loss(&self) -> f64 {
        self.eta / (1.0 + self.eta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InstanceError {
    InvalidNoise(&'static str),
    /// n or the derived measurement count is unusable.
    InvalidDimensions { n: usize, m: usize },
    /// The three dense matrices would exceed the memory budget; reported
    /// before any allocation happens.
    BudgetExceeded { required_bytes: u128, budget_bytes: u128 },
    /// Raw-parts constructor got inconsistent buffer sizes.
    ShapeMismatch,
}

impl core::fmt::Display for InstanceError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            InstanceError::InvalidNoise(s) => write!(f, "{s}"),
            InstanceError::InvalidDimensions { n, m } => {
                write!(f, "unusable dimensions n={n}, m={m}")
            }
            InstanceError::BudgetExceeded { required_bytes, budget_bytes } => write!(
                f,
                "instance needs {required_bytes} bytes which exceeds the {budget_bytes}-byte budget"
            ),
            InstanceError::ShapeMismatch => write!(f, "buffer sizes do not match dimensions"),
        }
    }
}

impl core::error::Error for InstanceError {}

/// Default budget for the three dense matrices of one instance.
pub const DEFAULT_MEMORY_BUDGET_BYTES: u128 = 16 << 30;

/// A generated (or loaded) reconstruction problem.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    true_matrix: DenseMatrix,
    observed_matrix: DenseMatrix,
    posterior_matrix: DenseMatrix,
    signal: Vec<f64>,
    measurements: Vec<f64>,
    noise: NoiseModel,
    prior: SignalPrior,
    seed: u64,
    column_sq_norms: Vec<f64>,
}

impl ProblemInstance {
    pub fn n(&self) -> usize {
        self.true_matrix.cols()
    }

    pub fn m(&self) -> usize {
        self.true_matrix.rows()
    }

    pub fn true_matrix(&self) -> &DenseMatrix {
        &self.true_matrix
    }

    pub fn observed_matrix(&self) -> &DenseMatrix {
        &self.observed_matrix
    }

    /// The element-wise posterior-mean matrix, observed/√(1+η); this is the
    /// matrix the solver sweeps, never the true one.
    pub fn posterior_matrix(&self) -> &DenseMatrix {
        &self.posterior_matrix
    }

    pub fn signal(&self) -> &[f64] {
        &self.signal
    }

    pub fn measurements(&self) -> &[f64] {
        &self.measurements
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn prior(&self) -> &SignalPrior {
        &self.prior
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Cached Σ_μ F²_μi of the posterior matrix (used every solver sweep).
    pub fn column_sq_norms(&self) -> &[f64] {
        &self.column_sq_norms
    }

    /// Per-element posterior variance of the true matrix given the observed
    /// one, η/(N(1+η)).
    pub fn element_posterior_variance(&self) -> f64 {
        self.noise.info_loss() / self.n() as f64
    }

    /// Rebuild an instance from stored parts. The posterior matrix and the
    /// cached column norms are recomputed, which reproduces generation
    /// bit-exactly because they are pure functions of the stored fields.
    pub fn from_parts(
        true_matrix: DenseMatrix,
        observed_matrix: DenseMatrix,
        signal: Vec<f64>,
        measurements: Vec<f64>,
        noise: NoiseModel,
        prior: SignalPrior,
        seed: u64,
    ) -> Result<Self, InstanceError> {
        let (m, n) = (true_matrix.rows(), true_matrix.cols());
        if m == 0 || n == 0 {
            return Err(InstanceError::InvalidDimensions { n, m });
        }
        if observed_matrix.rows() != m
            || observed_matrix.cols() != n
            || signal.len() != n
            || measurements.len() != m
        {
            return Err(InstanceError::ShapeMismatch);
        }
        let scale = 1.0 / math::sqrt(1.0 + noise.eta());
        let mut posterior = observed_matrix.clone();
        for v in posterior.data_mut() {
            *v *= scale;
        }
        let column_sq_norms = posterior.column_sq_norms();
        Ok(ProblemInstance {
            true_matrix,
            observed_matrix,
            posterior_matrix: posterior,
            signal,
            measurements,
            noise,
            prior,
            seed,
            column_sq_norms,
        })
    }
}

fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn fill_gaussian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let g: f64 = StandardNormal.sample(rng);
        out.push(g * scale);
    }
    out
}

/// Generate an instance with the default memory budget.
///
/// The measurement count is `m = round(alpha * n)` and must come out
/// at least 1.
pub fn generate(
    n: usize,
    alpha: f64,
    prior: SignalPrior,
    noise: NoiseModel,
    seed: u64,
) -> Result<ProblemInstance, InstanceError> {
    generate_with_budget(n, alpha, prior, noise, seed, DEFAULT_MEMORY_BUDGET_BYTES)
}

/// Generate an instance, refusing before allocation if the three dense
/// matrices would exceed `budget_bytes`.
pub fn generate_with_budget(
    n: usize,
    alpha: f64,
    prior: SignalPrior,
    noise: NoiseModel,
    seed: u64,
    budget_bytes: u128,
) -> Result<ProblemInstance, InstanceError> {
    if n == 0 || !alpha.is_finite() || alpha <= 0.0 {
        return Err(InstanceError::InvalidDimensions { n, m: 0 });
    }
    let m = math::round(alpha * n as f64) as usize;
    if m == 0 {
        return Err(InstanceError::InvalidDimensions { n, m });
    }
    let required = 3u128 * (m as u128) * (n as u128) * 8;
    if required > budget_bytes {
        return Err(InstanceError::BudgetExceeded {
            required_bytes: required,
            budget_bytes,
        });
    }

    let inv_sqrt_n = 1.0 / math::sqrt(n as f64);
    let true_data = fill_gaussian(&mut substream(seed, 0), m * n, inv_sqrt_n);

    // corruption buffer becomes the observed matrix in place
    let mut observed_data = fill_gaussian(&mut substream(seed, 1), m * n, inv_sqrt_n);
    let sqrt_eta = math::sqrt(noise.eta());
    let inv_sqrt_1pe = 1.0 / math::sqrt(1.0 + noise.eta());
    for (o, &t) in observed_data.iter_mut().zip(&true_data) {
        *o = (t + *o * sqrt_eta) * inv_sqrt_1pe;
    }

    let sqrt_delta = math::sqrt(noise.delta());
    let noise_vec = fill_gaussian(&mut substream(seed, 2), m, sqrt_delta);

    let signal = prior.sample_with(&mut substream(seed, 3), n);

    let true_matrix = DenseMatrix::from_vec(m, n, true_data).expect("sized above");
    let mut measurements = true_matrix.mul_vec(&signal);
    for (y, xi) in measurements.iter_mut().zip(&noise_vec) {
        *y += xi;
    }

    let observed_matrix = DenseMatrix::from_vec(m, n, observed_data).expect("sized above");
    ProblemInstance::from_parts(
        true_matrix,
        observed_matrix,
        signal,
        measurements,
        noise,
        prior,
        seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(rho: f64, delta: f64, eta: f64, seed: u64) -> ProblemInstance {
        generate(64, 0.5, SignalPrior::new(rho).unwrap(), NoiseModel::new(delta, eta).unwrap(), seed)
            .unwrap()
    }

    #[test]
    fn zero_signal_zero_noise_gives_zero_measurements() {
        let inst = generate(
            4,
            0.5,
            SignalPrior::new(0.0).unwrap(),
            NoiseModel::new(0.0, 0.0).unwrap(),
            1,
        )
        .unwrap();
        assert_eq!(inst.m(), 2);
        assert!(inst.measurements().iter().all(|&y| y == 0.0));
    }

    #[test]
    fn eta_zero_matrices_coincide() {
        let inst = tiny(0.3, 0.01, 0.0, 5);
        assert_eq!(inst.true_matrix().data(), inst.observed_matrix().data());
        assert_eq!(inst.true_matrix().data(), inst.posterior_matrix().data());
    }

    #[test]
    fn posterior_is_rescaled_observed_bit_exactly() {
        let inst = tiny(0.3, 0.0, 0.37, 5);
        let scale = 1.0 / (1.0f64 + 0.37).sqrt();
        for (p, o) in inst.posterior_matrix().data().iter().zip(inst.observed_matrix().data()) {
            assert_eq!(*p, o * scale);
        }
    }

    #[test]
    fn measurement_identity_holds() {
        // recomputing F0 s from stored parts reproduces y up to the stored noise
        let inst = tiny(0.5, 0.0, 0.1, 11);
        let y2 = inst.true_matrix().mul_vec(inst.signal());
        for (a, b) in y2.iter().zip(inst.measurements()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let a = tiny(0.2, 1e-3, 1e-2, 42);
        let b = tiny(0.2, 1e-3, 1e-2, 42);
        assert_eq!(a.true_matrix().data(), b.true_matrix().data());
        assert_eq!(a.observed_matrix().data(), b.observed_matrix().data());
        assert_eq!(a.signal(), b.signal());
        assert_eq!(a.measurements(), b.measurements());
        let c = tiny(0.2, 1e-3, 1e-2, 43);
        assert_ne!(a.true_matrix().data(), c.true_matrix().data());
    }

    #[test]
    fn budget_refused_before_allocation() {
        let err = generate_with_budget(
            1 << 20,
            1.0,
            SignalPrior::new(0.1).unwrap(),
            NoiseModel::new(0.0, 0.0).unwrap(),
            0,
            1 << 30,
        )
        .unwrap_err();
        assert!(matches!(err, InstanceError::BudgetExceeded { .. }));
    }

    #[test]
    fn rejects_zero_measurements() {
        let err = generate(
            10,
            0.01,
            SignalPrior::new(0.1).unwrap(),
            NoiseModel::new(0.0, 0.0).unwrap(),
            0,
        )
        .unwrap_err();
        assert!(matches!(err, InstanceError::InvalidDimensions { .. }));
    }

    #[test]
    fn entry_variance_concentrates() {
        // pooled over seeds: empirical variance of F0 entries within
        // 3 standard errors of 1/N
        let n = 1000;
        let mut sum_sq = 0.0;
        let mut count = 0usize;
        for seed in 0..50 {
            let inst = generate(
                n,
                0.5,
                SignalPrior::new(0.1).unwrap(),
                NoiseModel::new(0.0, 0.0).unwrap(),
                seed,
            )
            .unwrap();
            sum_sq += inst.true_matrix().data().iter().map(|x| x * x).sum::<f64>();
            count += inst.true_matrix().data().len();
        }
        let var = sum_sq / count as f64;
        let expected = 1.0 / n as f64;
        let se = expected * (2.0 / count as f64).sqrt();
        assert!((var - expected).abs() < 3.0 * se, "var {var} vs {expected} (se {se})");
    }

    #[test]
    fn column_moments_concentrate() {
        let n = 1000;
        let inst = generate(
            n,
            0.5,
            SignalPrior::new(0.1).unwrap(),
            NoiseModel::new(0.0, 0.0).unwrap(),
            3,
        )
        .unwrap();
        let m = inst.m() as f64;
        let expected = 1.0 / n as f64;
        let se = expected * (2.0 / m).sqrt();
        for i in 0..n {
            let col_mean_sq = inst.column_sq_norms()[i] / m;
            assert!(
                (col_mean_sq - expected).abs() < 5.0 * se,
                "column {i}: {col_mean_sq} vs {expected}"
            );
        }
    }

    #[test]
    fn mismatch_noise_level() {
        // mean of (y - F s)^2 should be close to delta + rho * eta/(1+eta)
        let (rho, delta, eta) = (0.1, 1e-10, 1e-4);
        let mut total = 0.0;
        let mut rows = 0usize;
        for seed in 0..3 {
            let inst = generate(
                10_000,
                0.5,
                SignalPrior::new(rho).unwrap(),
                NoiseModel::new(delta, eta).unwrap(),
                seed,
            )
            .unwrap();
            let fs = inst.posterior_matrix().mul_vec(inst.signal());
            total += fs
                .iter()
                .zip(inst.measurements())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
            rows += inst.m();
        }
        let observed = total / rows as f64;
        let d = eta / (1.0 + eta);
        let predicted = delta + rho * d;
        assert!(
            (observed - predicted).abs() < 0.1 * predicted,
            "observed {observed} predicted {predicted}"
        );
    }
}
