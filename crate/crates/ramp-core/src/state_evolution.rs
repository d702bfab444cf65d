//! Density evolution: the scalar recursion the solver's MSE follows as the
//! system size grows without bound.
//!
//! One step maps a candidate MSE `e` to the expected posterior variance of
//! a single component observed through the effective scalar channel of
//! precision m(e): E' = E_x E_z f_c(1/m, x + z/√m), with x drawn from the
//! prior and z standard normal. The mixture prior splits the outer
//! expectation exactly: the zero branch sees pseudo-observations
//! distributed N(0, 1/m) and the Gaussian branch N(0, 1 + 1/m), so both
//! reduce to one-dimensional normal expectations of the closed-form
//! denoiser variance.

use alloc::vec::Vec;

use crate::math;
use crate::prior::SignalPrior;
use crate::quad::{merge_edges, normal_expectation_even, QuadError, RuleLadder};
use crate::replica::{ReplicaError, ReplicaParams};

/// Below this channel precision the posterior is the prior; the step
/// returns ρ and flags the point as degenerate (1/m would overflow).
pub const DEGENERATE_PRECISION: f64 = 1e-14;

pub const DEFAULT_MAX_ITERS: usize = 500;
pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum StateEvolutionError {
    Params(ReplicaError),
    Quadrature { e: f64, source: QuadError },
    NonFiniteResult { e: f64 },
    InvalidConfig(&'static str),
}

impl core::fmt::Display for StateEvolutionError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            StateEvolutionError::Params(e) => write!(f, "{e}"),
            StateEvolutionError::Quadrature { e, source } => {
                write!(f, "density-evolution quadrature failed at E={e:e}: {source}")
            }
            StateEvolutionError::NonFiniteResult { e } => {
                write!(f, "density-evolution step produced a non-finite value at E={e:e}")
            }
            StateEvolutionError::InvalidConfig(s) => write!(f, "{s}"),
        }
    }
}

impl core::error::Error for StateEvolutionError {}

/// Outcome of one recursion step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeStep {
    pub value: f64,
    /// The channel carries no information (D = 1); `value` is ρ.
    pub degenerate: bool,
}

/// Reusable quadrature state for repeated steps.
pub struct DeKernel {
    ladder: RuleLadder,
}

impl Default for DeKernel {
    fn default() -> Self {
        Self::new()
    }
}

impl DeKernel {
    pub fn new() -> Self {
        DeKernel { ladder: RuleLadder::standard() }
    }

    pub fn step(&self, params: &ReplicaParams, e: f64) -> Result<DeStep, StateEvolutionError> {
        let m = params.effective_precision(e).map_err(StateEvolutionError::Params)?;
        let rho = params.rho();
        if m < DEGENERATE_PRECISION {
            return Ok(DeStep { value: rho, degenerate: true });
        }
        let prior = SignalPrior::new(rho).expect("rho validated by ReplicaParams");
        let sigma2 = 1.0 / m;

        // radius where the denoiser flips from the point mass to the slab
        let transition_radius = if rho < 1.0 {
            let a = math::ln(rho / (1.0 - rho)) + 0.5 * math::ln(sigma2 / (1.0 + sigma2));
            if a < 0.0 {
                Some(math::sqrt(-2.0 * a * sigma2 * (1.0 + sigma2)))
            } else {
                None
            }
        } else {
            None
        };

        let branch = |tau: f64| -> Result<f64, StateEvolutionError> {
            let base =
                [0.0, 0.25, 0.5, 1.0, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 18.0, 26.0, 35.0, 42.0];
            let mut extra = [f64::NAN; 9];
            if let Some(rt) = transition_radius {
                let ut = rt / tau;
                extra = [
                    0.5 * ut,
                    0.75 * ut,
                    0.9 * ut,
                    ut,
                    1.1 * ut,
                    1.25 * ut,
                    1.5 * ut,
                    2.0 * ut,
                    3.0 * ut,
                ];
            }
            let edges = merge_edges(&base, &extra, 0.0, 42.0);
            normal_expectation_even(&self.ladder, &edges, 1e-10, 0.0, |u| {
                prior.denoise_inner(sigma2, tau * u).variance
            })
            .map_err(|source| StateEvolutionError::Quadrature { e, source })
        };

        let zero_branch = branch(math::sqrt(sigma2))?;
        let slab_branch = branch(math::sqrt(1.0 + sigma2))?;
        let value = ((1.0 - rho) * zero_branch + rho * slab_branch).min(rho);
        if !value.is_finite() || value <= 0.0 {
            return Err(StateEvolutionError::NonFiniteResult { e });
        }
        Ok(DeStep { value, degenerate: false })
    }
}

/// One recursion step with a throwaway kernel; prefer [`DeKernel`] or
/// [`de_run`] in loops. Relative accuracy 1e-8 or better.
pub fn de_step(params: &ReplicaParams, e: f64) -> Result<DeStep, StateEvolutionError> {
    DeKernel::new().step(params, e)
}

/// Expected residual-variance estimate at MSE `e`: Δ + e + (ρ−e)·D. This
/// is the level the solver's V tracks along the trajectory.
pub fn predicted_v(params: &ReplicaParams, e: f64) -> f64 {
    params.effective_noise(e)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeStatus {
    Converged,
    MaxItersReached,
    /// The tail of the sequence alternates direction beyond tolerance.
    Oscillating,
    /// D = 1; the sequence is constant at ρ.
    Degenerate,
}

/// The recursion's path from E⁰ = ρ down to its fixed point.
#[derive(Debug, Clone, PartialEq)]
pub struct DeTrajectory {
    /// E⁰, E¹, …; `e_seq[0]` is exactly ρ.
    pub e_seq: Vec<f64>,
    pub fixed_point: f64,
    pub status: DeStatus,
    pub params: ReplicaParams,
}

/// Iterate from E⁰ = ρ until |E^{t+1} − E^t| < tol·max(E^t, 1e-12) or
/// `max_iters` steps.
pub fn de_run(
    params: &ReplicaParams,
    max_iters: usize,
    tol: f64,
) -> Result<DeTrajectory, StateEvolutionError> {
    if max_iters == 0 {
        return Err(StateEvolutionError::InvalidConfig("max_iters must be at least 1"));
    }
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(StateEvolutionError::InvalidConfig("tol must be finite and > 0"));
    }
    let kernel = DeKernel::new();
    let mut e = params.rho();
    let mut e_seq = alloc::vec![e];
    let mut status = DeStatus::MaxItersReached;
    for _ in 0..max_iters {
        let step = kernel.step(params, e)?;
        e_seq.push(step.value);
        if step.degenerate {
            status = DeStatus::Degenerate;
            e = step.value;
            break;
        }
        let threshold = tol * e.max(1e-12);
        let moved = math::abs(step.value - e);
        e = step.value;
        if moved < threshold {
            status = DeStatus::Converged;
            break;
        }
    }
    if status == DeStatus::MaxItersReached && oscillating_tail(&e_seq, tol) {
        status = DeStatus::Oscillating;
    }
    Ok(DeTrajectory { e_seq, fixed_point: e, status, params: *params })
}

fn oscillating_tail(e_seq: &[f64], tol: f64) -> bool {
    let tail = &e_seq[e_seq.len().saturating_sub(11)..];
    let (mut up, mut down) = (false, false);
    for w in tail.windows(2) {
        let thr = tol * w[0].max(1e-12);
        if w[1] - w[0] > thr {
            up = true;
        }
        if w[0] - w[1] > thr {
            down = true;
        }
    }
    up && down
}
