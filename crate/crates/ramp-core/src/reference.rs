//! Independent reference implementations used by the test suites.
//!
//! Everything here trades speed for transparency: scalar loops instead of
//! fused sweeps, adaptive Simpson instead of fixed-node rules, Monte Carlo
//! instead of quadrature. None of it shares code with the production
//! paths beyond the closed-form denoiser, which has its own quadrature
//! oracle in [`crate::prior`].

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::amp::{AmpConfig, AmpError, AmpState, ResidualVariance, VarianceRule};
use crate::instance::ProblemInstance;
use crate::math;
use crate::prior::SignalPrior;
use crate::replica::ReplicaParams;

/// Straight-line scalar transcription of one solver sweep: the prediction
/// update with its Onsager correction, the residual-variance rule on the
/// fresh residual, the per-component noise and pseudo-observation updates,
/// and the denoiser, each as plain nested loops. Column norms are
/// recomputed here rather than read from the instance cache.
pub fn amp_step_reference(
    state: &AmpState,
    inst: &ProblemInstance,
    prior: &SignalPrior,
    cfg: &AmpConfig,
) -> Result<AmpState, AmpError> {
    let (n, m) = (inst.n(), inst.m());
    let f = inst.posterior_matrix();
    let y = inst.measurements();
    let iteration = state.iteration + 1;

    let mut omega = alloc::vec![0.0; m];
    let mut f2v = alloc::vec![0.0; m];
    for mu in 0..m {
        let mut fa = 0.0;
        for i in 0..n {
            fa += f.get(mu, i) * state.estimate[i];
        }
        let mut sv = 0.0;
        for i in 0..n {
            sv += f.get(mu, i) * f.get(mu, i) * state.variance[i];
        }
        let v_old = match &state.residual_variance {
            ResidualVariance::Uniform(v) => *v,
            ResidualVariance::PerMeasurement(vs) => vs[mu],
        };
        omega[mu] = fa - (y[mu] - state.prediction[mu]) / v_old * sv;
        f2v[mu] = sv;
    }

    let delta = inst.noise().delta();
    let residual_variance = match cfg.rule {
        VarianceRule::Robust => {
            let mut acc = 0.0;
            for mu in 0..m {
                acc += (y[mu] - omega[mu]) * (y[mu] - omega[mu]);
            }
            ResidualVariance::Uniform((acc / m as f64).max(crate::amp::RESIDUAL_VARIANCE_FLOOR))
        }
        VarianceRule::KnownNoise => ResidualVariance::PerMeasurement(
            (0..m)
                .map(|mu| (delta + f2v[mu]).max(crate::amp::RESIDUAL_VARIANCE_FLOOR))
                .collect(),
        ),
        VarianceRule::MatrixUncertainty => {
            let mut second = 0.0;
            for i in 0..n {
                second += state.variance[i] + state.estimate[i] * state.estimate[i];
            }
            let corr = inst.noise().info_loss() * second / n as f64;
            ResidualVariance::PerMeasurement(
                (0..m)
                    .map(|mu| (delta + f2v[mu] + corr).max(crate::amp::RESIDUAL_VARIANCE_FLOOR))
                    .collect(),
            )
        }
    };

    let mut estimate = alloc::vec![0.0; n];
    let mut variance = alloc::vec![0.0; n];
    for i in 0..n {
        let (sigma2, r) = match &residual_variance {
            ResidualVariance::Uniform(v) => {
                let mut colsq = 0.0;
                for mu in 0..m {
                    colsq += f.get(mu, i) * f.get(mu, i);
                }
                let mut num = 0.0;
                for mu in 0..m {
                    num += f.get(mu, i) * (y[mu] - omega[mu]);
                }
                (v / colsq, state.estimate[i] + num / colsq)
            }
            ResidualVariance::PerMeasurement(vs) => {
                let mut den = 0.0;
                for mu in 0..m {
                    den += f.get(mu, i) * f.get(mu, i) / vs[mu];
                }
                let mut num = 0.0;
                for mu in 0..m {
                    num += f.get(mu, i) * (y[mu] - omega[mu]) / vs[mu];
                }
                let sigma2 = 1.0 / den;
                (sigma2, state.estimate[i] + num * sigma2)
            }
        };
        let d = prior
            .denoise(sigma2, r)
            .map_err(|_| AmpError::Diverged { iteration, last_mse: None })?;
        estimate[i] = cfg.damping * state.estimate[i] + (1.0 - cfg.damping) * d.mean;
        variance[i] = cfg.damping * state.variance[i] + (1.0 - cfg.damping) * d.variance;
    }

    Ok(AmpState { estimate, variance, prediction: omega, residual_variance, iteration })
}

/// Adaptive Simpson integration with absolute tolerance.
fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, abs_tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, m: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
    }
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        m: f64,
        b: f64,
        whole: f64,
        abs_tol: f64,
        depth: u32,
    ) -> f64 {
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let left = simpson(f, a, lm, m);
        let right = simpson(f, m, rm, b);
        if depth == 0 || math::abs(left + right - whole) <= 15.0 * abs_tol {
            return left + right + (left + right - whole) / 15.0;
        }
        recurse(f, a, lm, m, left, abs_tol / 2.0, depth - 1)
            + recurse(f, m, rm, b, right, abs_tol / 2.0, depth - 1)
    }
    let m = 0.5 * (a + b);
    recurse(f, a, m, b, simpson(f, a, m, b), abs_tol, 48)
}

/// The potential evaluated from its direct grouping — channel term
/// −(α/2)[ln W + (Δ+ρ)/W] plus the two normal-measure integrals of
/// ln[(1−ρ) + (ρ/√(m+1))·exp(·)] — by adaptive Simpson. No cancellation
/// control: the direct grouping loses ~ρ·m/2·ε absolute accuracy to f64
/// rounding, so comparisons should stay at moderate m.
pub fn potential_direct(params: &ReplicaParams, e: f64) -> f64 {
    let (alpha, rho) = (params.alpha(), params.rho());
    let d = params.info_loss();
    let w = params.effective_noise(e);
    let m = alpha * (1.0 - d) / w;
    let c = math::ln(rho) - 0.5 * math::ln_1p(m);
    let ln_1m_rho = if rho < 1.0 { math::ln(1.0 - rho) } else { f64::NEG_INFINITY };
    let channel = -(alpha / 2.0) * (math::ln(w) + (params.delta() + rho) / w);
    let narrow = |z: f64| {
        math::normal_pdf(z)
            * math::log_add_exp(ln_1m_rho, c + z * z * m / (2.0 * (m + 1.0)))
    };
    let wide =
        |z: f64| math::normal_pdf(z) * math::log_add_exp(ln_1m_rho, c + z * z * m / 2.0);
    let j2 = 2.0 * adaptive_simpson(&narrow, 0.0, 42.0, 1e-14);
    let j3 = 2.0 * adaptive_simpson(&wide, 0.0, 42.0, 1e-14 * (1.0 + m));
    channel + (1.0 - rho) * j2 + rho * j3
}

/// The known-matrix (η = 0) potential as its own transcription, with no
/// information-loss plumbing anywhere: W = Δ+E, m = α/W.
pub fn potential_zero_uncertainty(alpha: f64, rho: f64, delta: f64, e: f64) -> f64 {
    let w = delta + e;
    let m = alpha / w;
    let c = math::ln(rho) - 0.5 * math::ln_1p(m);
    let ln_1m_rho = if rho < 1.0 { math::ln(1.0 - rho) } else { f64::NEG_INFINITY };
    let channel = -(alpha / 2.0) * (math::ln(w) + (delta + rho) / w);
    let narrow = |z: f64| {
        math::normal_pdf(z)
            * math::log_add_exp(ln_1m_rho, c + z * z * m / (2.0 * (m + 1.0)))
    };
    let wide =
        |z: f64| math::normal_pdf(z) * math::log_add_exp(ln_1m_rho, c + z * z * m / 2.0);
    let j2 = 2.0 * adaptive_simpson(&narrow, 0.0, 42.0, 1e-14);
    let j3 = 2.0 * adaptive_simpson(&wide, 0.0, 42.0, 1e-14 * (1.0 + m));
    channel + (1.0 - rho) * j2 + rho * j3
}

/// Density-evolution step recomputed by adaptive Simpson over the
/// pseudo-observation distributions of the two prior branches.
pub fn de_step_reference(params: &ReplicaParams, e: f64) -> f64 {
    let rho = params.rho();
    let d = params.info_loss();
    let m = params.alpha() * (1.0 - d) / params.effective_noise(e);
    if m < 1e-14 {
        return rho;
    }
    let prior = SignalPrior::new(rho).expect("validated");
    let sigma2 = 1.0 / m;
    let branch = |tau: f64| -> f64 {
        let density = |r: f64| math::exp(-0.5 * r * r / (tau * tau)) / (tau * math::sqrt(2.0 * core::f64::consts::PI));
        let integrand = |r: f64| density(r) * prior.denoise_inner(sigma2, r).variance;
        let mut hi = 12.0 * tau;
        if rho < 1.0 {
            let a = math::ln(rho / (1.0 - rho)) + 0.5 * math::ln(sigma2 / (1.0 + sigma2));
            if a < 0.0 {
                hi = hi.max(1.5 * math::sqrt(-2.0 * a * sigma2 * (1.0 + sigma2)) + 12.0 * tau);
            }
        }
        let crude = 2.0 * adaptive_simpson(&integrand, 0.0, hi, 1e-9);
        2.0 * adaptive_simpson(&integrand, 0.0, hi, 1e-11 * math::abs(crude).max(1e-18))
    };
    let zero = branch(math::sqrt(sigma2));
    let slab = branch(math::sqrt(1.0 + sigma2));
    (1.0 - rho) * zero + rho * slab
}

/// Monte Carlo estimate of the density-evolution step: draws signal
/// components from the prior and pseudo-observations from the effective
/// channel, and averages the denoiser variance. Returns (mean, stderr).
pub fn de_step_monte_carlo(
    params: &ReplicaParams,
    e: f64,
    samples: usize,
    seed: u64,
) -> (f64, f64) {
    let rho = params.rho();
    let d = params.info_loss();
    let m = params.alpha() * (1.0 - d) / params.effective_noise(e);
    let prior = SignalPrior::new(rho).expect("validated");
    let sigma2 = 1.0 / m;
    let noise_scale = math::sqrt(sigma2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let u: f64 = rand::Rng::gen(&mut rng);
        let x: f64 = if u < rho { StandardNormal.sample(&mut rng) } else { 0.0 };
        let z: f64 = StandardNormal.sample(&mut rng);
        let fc = prior.denoise_inner(sigma2, x + z * noise_scale).variance;
        sum += fc;
        sum_sq += fc * fc;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0);
    (mean, math::sqrt(var / n))
}
