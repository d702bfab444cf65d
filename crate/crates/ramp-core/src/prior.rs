//! Gauss-Bernoulli signal prior and its Bayes denoiser.
//!
//! A signal component is 0 with probability 1−ρ and otherwise a standard
//! normal draw. Conditioned on a Gaussian observation `r` of the component
//! with noise variance `sigma2`, the posterior is a two-component mixture:
//! a point mass at 0 and a normal with mean `r/(1+sigma2)` and variance
//! `sigma2/(1+sigma2)`. [`SignalPrior::denoise`] returns the mean and
//! variance of that mixture in closed form; it is the single
//! model-dependent kernel used by the solver and by density evolution, and
//! it is evaluated once per signal component per iteration, so it works in
//! log-domain weights and never calls a quadrature.
//!
//! [`denoise_oracle`] recomputes the same quantities by direct numerical
//! integration of the defining integrals. It exists to validate the closed
//! form and is only meant for tests.

use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::math;
use crate::quad::{merge_edges, RuleLadder};

/// Density ρ of nonzero components plus the (fixed) unit-variance Gaussian
/// shape of the nonzero part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalPrior {
    rho: f64,
}

/// Posterior mean and variance of one signal component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenoiserResult {
    pub mean: f64,
    pub variance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PriorError {
    /// Density outside [0, 1] or non-finite.
    InvalidDensity(f64),
    /// Noise variance must be finite and strictly positive.
    InvalidNoiseVariance(f64),
    /// Observation must be finite.
    NonFiniteObservation(f64),
    /// The test-only quadrature route failed to converge.
    OracleNotConverged,
}

impl core::fmt::Display for PriorError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            PriorError::InvalidDensity(r) => write!(f, "density must lie in [0,1], got {r}"),
            PriorError::InvalidNoiseVariance(s) => {
                write!(f, "noise variance must be finite and > 0, got {s}")
            }
            PriorError::NonFiniteObservation(r) => write!(f, "non-finite observation {r}"),
            PriorError::OracleNotConverged => write!(f, "denoiser quadrature did not converge"),
        }
    }
}

impl core::error::Error for PriorError {}

impl SignalPrior {
    pub fn new(rho: f64) -> Result<Self, PriorError> {
        if !(0.0..=1.0).contains(&rho) || !rho.is_finite() {
            return Err(PriorError::InvalidDensity(rho));
        }
        Ok(SignalPrior { rho })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Prior second moment (the prior mean is 0, so this is the variance).
    pub fn second_moment(&self) -> f64 {
        self.rho
    }

    /// Posterior mean and variance of a component observed through
    /// additive Gaussian noise of variance `sigma2` at value `r`.
    ///
    /// Stable for |r|/σ up to 10³ and σ² down to 10⁻¹⁴: the mixture
    /// responsibility is formed from the log-odds of the two component
    /// evidences and saturates exactly to 0 or 1 instead of overflowing.
    pub fn denoise(&self, sigma2: f64, r: f64) -> Result<DenoiserResult, PriorError> {
        if !sigma2.is_finite() || sigma2 <= 0.0 {
            return Err(PriorError::InvalidNoiseVariance(sigma2));
        }
        if !r.is_finite() {
            return Err(PriorError::NonFiniteObservation(r));
        }
        Ok(self.denoise_inner(sigma2, r))
    }

    #[inline]
    pub(crate) fn denoise_inner(&self, sigma2: f64, r: f64) -> DenoiserResult {
        let rho = self.rho;
        if rho == 0.0 {
            return DenoiserResult { mean: 0.0, variance: 0.0 };
        }
        let slab_var = sigma2 / (1.0 + sigma2);
        let slab_mean = r / (1.0 + sigma2);
        if rho == 1.0 {
            return DenoiserResult { mean: slab_mean, variance: slab_var };
        }
        // log-odds of the slab against the point mass
        let t = math::ln(rho / (1.0 - rho)) + 0.5 * math::ln(slab_var)
            + r * r / (2.0 * sigma2 * (1.0 + sigma2));
        let pi = math::logistic_saturating(t);
        DenoiserResult {
            mean: pi * slab_mean,
            variance: pi * slab_var + pi * (1.0 - pi) * slab_mean * slab_mean,
        }
    }

    /// Draw `n` signal components: each independently 0 with probability
    /// 1−ρ, otherwise standard normal. Deterministic given `seed`.
    pub fn sample_signal(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(&mut rng, n)
    }

    /// Same as [`sample_signal`](Self::sample_signal) but drawing from a
    /// caller-provided stream.
    pub fn sample_with<R: Rng>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = rng.gen();
            if u < self.rho {
                out.push(StandardNormal.sample(rng));
            } else {
                out.push(0.0);
            }
        }
        out
    }
}

/// Same contract as [`SignalPrior::denoise`], computed by direct quadrature
/// of the defining integrals ∫ xᵏ P(x) N(x; r, σ²) dx. Test oracle only:
/// orders of magnitude slower than the closed form.
pub fn denoise_oracle(
    prior: &SignalPrior,
    sigma2: f64,
    r: f64,
) -> Result<DenoiserResult, PriorError> {
    if !sigma2.is_finite() || sigma2 <= 0.0 {
        return Err(PriorError::InvalidNoiseVariance(sigma2));
    }
    if !r.is_finite() {
        return Err(PriorError::NonFiniteObservation(r));
    }
    let rho = prior.rho();
    if rho == 0.0 {
        return Ok(DenoiserResult { mean: 0.0, variance: 0.0 });
    }
    let sigma = math::sqrt(sigma2);
    // The slab integrand is the product of two Gaussians, concentrated
    // around mu with width w; panels cover ±14 widths.
    let mu = r / (1.0 + sigma2);
    let w = sigma / math::sqrt(1.0 + sigma2);
    let log_integrand = |x: f64| {
        -0.5 * x * x - (x - r) * (x - r) / (2.0 * sigma2)
            - 2.0 * math::HALF_LN_TWO_PI
            - math::ln(sigma)
    };
    let shift = log_integrand(mu);
    let edges = merge_edges(
        &[mu - 14.0 * w, mu - 6.0 * w, mu - 2.0 * w, mu + 2.0 * w, mu + 6.0 * w],
        &[],
        mu - 14.0 * w,
        mu + 14.0 * w,
    );
    let ladder = RuleLadder::standard();
    let value = |x: f64| math::exp(log_integrand(x) - shift);
    let mass = ladder
        .converge(&edges, 1e-12, 1e-300, value)
        .map_err(|_| PriorError::OracleNotConverged)?;
    // moment integrals can vanish by symmetry, so their convergence floor
    // comes from the mass integral times powers of the support scale
    let support = 1.0 + math::abs(mu) + w;
    let first = ladder
        .converge(&edges, 1e-12, mass * support, |x| value(x) * x)
        .map_err(|_| PriorError::OracleNotConverged)?;
    let second = ladder
        .converge(&edges, 1e-12, mass * support * support, |x| value(x) * x * x)
        .map_err(|_| PriorError::OracleNotConverged)?;
    let moments = [mass, first, second];
    // point-mass evidence relative to the same shift
    let log_spike = -r * r / (2.0 * sigma2) - math::HALF_LN_TWO_PI - math::ln(sigma);
    let spike = if rho == 1.0 { 0.0 } else { (1.0 - rho) * math::exp(log_spike - shift) };
    let z = spike + rho * moments[0];
    let mean = rho * moments[1] / z;
    let second = rho * moments[2] / z;
    Ok(DenoiserResult { mean, variance: second - mean * mean })
}
