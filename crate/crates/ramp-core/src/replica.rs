//! The achievability potential Φ(E).
//!
//! For candidate mean-squared error E the potential combines a Gaussian
//! channel term with two prior terms, each a scalar expectation over the
//! standard normal measure; its global maximizer is the best achievable
//! MSE for the parameter set. Writing W = Δ + E + (ρ−E)·D with
//! D = η/(1+η), and m = α(1−D)/W with c = ln ρ − ½ln(m+1):
//!
//! ```text
//! Φ(E) = −(α/2)·[ln W + (Δ + ρD)/W]
//!        + (1−ρ)·∫Dz ln[(1−ρ) + exp(c + z²·m/(2(m+1)))]
//!        + ρ·( c + ∫Dz ln[1 + (1−ρ)·exp(−z²·m/2 − c)] )
//! ```
//!
//! The channel term and the third term are an algebraically exact
//! regrouping of the form −(α/2)[ln W + (Δ+ρ)/W] + ρ∫Dz ln[(1−ρ) +
//! exp(c + z²m/2)]: the two pieces of size O(m) are cancelled in closed
//! form, which keeps the evaluation accurate for m up to 10¹² where the
//! direct grouping loses ten digits to cancellation. The integrands are
//! evaluated through log-sum-exp so no exponential ever overflows.

use alloc::vec::Vec;

use crate::math;
use crate::quad::{merge_edges, QuadError, RuleLadder};

/// Parameter point of the asymptotic theory.
///
/// `eta = f64::INFINITY` is accepted and means a fully unknown matrix
/// (D = 1); the potential is then flat and downstream consumers report the
/// point as degenerate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicaParams {
    alpha: f64,
    rho: f64,
    delta: f64,
    eta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReplicaError {
    InvalidParams(&'static str),
    /// Candidate MSE outside (0, rho].
    MseOutOfRange { e: f64, rho: f64 },
    InvalidGrid(&'static str),
    /// Order doubling did not settle at the requested accuracy.
    Quadrature { e: f64, source: QuadError },
    /// Flat potential (D = 1): the maximizer is undefined.
    DegeneratePlateau,
}

impl core::fmt::Display for ReplicaError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ReplicaError::InvalidParams(s) => write!(f, "invalid parameters: {s}"),
            ReplicaError::MseOutOfRange { e, rho } => {
                write!(f, "candidate mse {e} outside (0, {rho}]")
            }
            ReplicaError::InvalidGrid(s) => write!(f, "invalid grid: {s}"),
            ReplicaError::Quadrature { e, source } => {
                write!(f, "potential quadrature failed at E={e:e}: {source}")
            }
            ReplicaError::DegeneratePlateau => {
                write!(f, "flat potential (full matrix uncertainty), maximizer undefined")
            }
        }
    }
}

impl core::error::Error for ReplicaError {}

impl ReplicaParams {
    pub fn new(alpha: f64, rho: f64, delta: f64, eta: f64) -> Result<Self, ReplicaError> {
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(ReplicaError::InvalidParams("alpha must be finite and > 0"));
        }
        if !rho.is_finite() || rho <= 0.0 || rho > 1.0 {
            return Err(ReplicaError::InvalidParams("rho must lie in (0, 1]"));
        }
        if !delta.is_finite() || delta < 0.0 {
            return Err(ReplicaError::InvalidParams("delta must be finite and >= 0"));
        }
        if eta.is_nan() || eta < 0.0 {
            return Err(ReplicaError::InvalidParams("eta must be >= 0 (infinity allowed)"));
        }
        Ok(ReplicaParams { alpha, rho, delta, eta })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Share of matrix information lost to uncertainty, D = η/(1+η).
    pub fn info_loss(&self) -> f64 {
        if self.eta.is_infinite() {
            1.0
        } else {
            self.eta / (1.0 + self.eta)
        }
    }

    /// Effective residual variance W = Δ + E + (ρ−E)·D at MSE `e`.
    pub fn effective_noise(&self, e: f64) -> f64 {
        let d = self.info_loss();
        self.delta + e + (self.rho - e) * d
    }

    /// Precision m = α(1−D)/W of the scalar Gaussian channel each signal
    /// component effectively sees at MSE `e`.
    pub fn effective_precision(&self, e: f64) -> Result<f64, ReplicaError> {
        self.check_mse(e)?;
        let w = self.effective_noise(e);
        if !(w > 0.0) {
            return Err(ReplicaError::InvalidParams("non-positive effective noise"));
        }
        Ok(self.alpha * (1.0 - self.info_loss()) / w)
    }

    fn check_mse(&self, e: f64) -> Result<(), ReplicaError> {
        if !e.is_finite() || e <= 0.0 || e > self.rho {
            return Err(ReplicaError::MseOutOfRange { e, rho: self.rho });
        }
        Ok(())
    }
}

/// Shared quadrature state for repeated potential evaluations.
pub struct PotentialKernel {
    ladder: RuleLadder,
}

impl Default for PotentialKernel {
    fn default() -> Self {
        Self::new()
    }
}

const QUAD_REL_TOL: f64 = 1e-11;
const QUAD_SCALE_FLOOR: f64 = 1e-4;

impl PotentialKernel {
    pub fn new() -> Self {
        PotentialKernel { ladder: RuleLadder::standard() }
    }

    /// Φ(E); relative accuracy 1e-10, confirmed by order doubling.
    pub fn potential(&self, params: &ReplicaParams, e: f64) -> Result<f64, ReplicaError> {
        params.check_mse(e)?;
        let (alpha, rho) = (params.alpha, params.rho);
        let d = params.info_loss();
        let w = params.effective_noise(e);
        let m = alpha * (1.0 - d) / w;
        let channel = -(alpha / 2.0) * (math::ln(w) + (params.delta + rho * d) / w);
        let c = math::ln(rho) - 0.5 * math::ln_1p(m);
        let ln_1m_rho = if rho < 1.0 { math::ln(1.0 - rho) } else { f64::NEG_INFINITY };

        // prior term against the narrow branch of the posterior overlap
        let beta = m / (2.0 * (m + 1.0));
        let mut extra = [f64::NAN; 5];
        if beta > 0.0 && rho < 1.0 {
            let zt2 = (ln_1m_rho - c) / beta;
            if zt2 > 0.0 {
                let zt = math::sqrt(zt2);
                extra = [0.6 * zt, 0.8 * zt, zt, 1.25 * zt, 1.6 * zt];
            }
        }
        let base =
            [0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0, 13.0, 17.0, 22.0, 28.0, 35.0, 42.0];
        let edges = merge_edges(&base, &extra, 0.0, 42.0);
        let i2 = self
            .ladder
            .converge(&edges, QUAD_REL_TOL, QUAD_SCALE_FLOOR, |z| {
                math::normal_pdf(z) * math::log_add_exp(ln_1m_rho, c + z * z * beta)
            })
            .map_err(|source| ReplicaError::Quadrature { e, source })?
            * 2.0;

        // wide-branch remainder after exact cancellation of the O(m) part;
        // substitution z = s·u keeps the integrand resolved at any m
        let s = 1.0 / math::sqrt(m.max(1.0));
        let half_curv = s * s * m / 2.0;
        let u_max = if m >= 1.0 {
            (math::sqrt(1490.0 + 2.0 * (-c).max(0.0)) + 1.0).min(42.0 / s)
        } else {
            42.0
        };
        let mut extra = [f64::NAN; 3];
        if rho < 1.0 {
            let ut2 = (ln_1m_rho - c) / half_curv;
            if ut2 > 0.0 {
                let ut = math::sqrt(ut2);
                extra = [0.7 * ut, ut, 1.4 * ut];
            }
        }
        let base = [0.0, 0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, 12.0, 18.0, 26.0, u_max];
        let edges = merge_edges(&base, &extra, 0.0, u_max);
        let i3_rem = self
            .ladder
            .converge(&edges, QUAD_REL_TOL, QUAD_SCALE_FLOOR, |u| {
                let z = s * u;
                let arg = ln_1m_rho - u * u * half_curv - c;
                s * math::normal_pdf(z) * math::log_add_exp(0.0, arg)
            })
            .map_err(|source| ReplicaError::Quadrature { e, source })?
            * 2.0;

        Ok(channel + (1.0 - rho) * i2 + rho * (c + i3_rem))
    }
}

/// Single-shot Φ(E); builds a throwaway kernel, so prefer
/// [`PotentialKernel`] or [`scan_potential`] in loops.
pub fn potential(params: &ReplicaParams, e: f64) -> Result<f64, ReplicaError> {
    PotentialKernel::new().potential(params, e)
}

/// Grid request for [`scan_potential`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Number of log-spaced evaluation points (at least 64).
    pub points: usize,
    /// Lower edge; defaults to max(1e-12, Δ/10), clamped below ρ.
    pub e_min: Option<f64>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { points: 256, e_min: None }
    }
}

/// A local maximum of the potential. Maxima on a grid endpoint are
/// reported unrefined with the `boundary` flag set (the maximizer may
/// genuinely sit at E → 0 in the noiseless regime, or at E = ρ when the
/// measurements carry no information).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialMaximum {
    pub e: f64,
    pub phi: f64,
    pub boundary: bool,
}

/// Sampled potential with located maxima, sorted by E.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialCurve {
    pub grid: Vec<f64>,
    pub phi: Vec<f64>,
    pub maxima: Vec<PotentialMaximum>,
    /// The curve is constant (full uncertainty); `maxima` is then empty.
    pub plateau: bool,
}

/// Relative width (in E) to which interior maxima are refined.
pub const REFINE_REL_TOL: f64 = 1e-8;

fn golden_max<F: FnMut(f64) -> Result<f64, ReplicaError>>(
    mut lo: f64,
    mut hi: f64,
    tol: f64,
    mut eval: F,
) -> Result<(f64, f64), ReplicaError> {
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    while hi - lo > tol {
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = eval(c)?;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = eval(d)?;
        }
    }
    let xm = 0.5 * (lo + hi);
    let fm = eval(xm)?;
    Ok((xm, fm))
}

/// Evaluate Φ on a log-spaced grid and refine every interior local maximum
/// by golden-section search (in log E) to relative width 1e-8.
pub fn scan_potential(
    params: &ReplicaParams,
    grid: &GridSpec,
) -> Result<PotentialCurve, ReplicaError> {
    if grid.points < 64 {
        return Err(ReplicaError::InvalidGrid("grid needs at least 64 points"));
    }
    let rho = params.rho;
    let e_min = match grid.e_min {
        Some(v) => {
            if !(v > 0.0) || v >= rho {
                return Err(ReplicaError::InvalidGrid("e_min must lie in (0, rho)"));
            }
            v
        }
        None => (1e-12f64).max(params.delta / 10.0).min(rho * 1e-3),
    };
    let kernel = PotentialKernel::new();
    let n = grid.points;
    let ratio = math::ln(rho / e_min) / (n - 1) as f64;
    let mut es: Vec<f64> = (0..n).map(|i| e_min * math::exp(ratio * i as f64)).collect();
    es[n - 1] = rho;

    #[cfg(feature = "parallel")]
    let phi: Vec<f64> = {
        use rayon::prelude::*;
        es.par_iter()
            .map(|&e| kernel.potential(params, e))
            .collect::<Result<Vec<f64>, ReplicaError>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let phi: Vec<f64> = es
        .iter()
        .map(|&e| kernel.potential(params, e))
        .collect::<Result<Vec<f64>, ReplicaError>>()?;

    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &p in &phi {
        lo = lo.min(p);
        hi = hi.max(p);
    }
    let scale = 1.0 + math::abs(math::mean(&phi));
    if hi - lo <= 1e-12 * scale {
        return Ok(PotentialCurve { grid: es, phi, maxima: Vec::new(), plateau: true });
    }

    let mut maxima = Vec::new();
    if phi[0] > phi[1] {
        maxima.push(PotentialMaximum { e: es[0], phi: phi[0], boundary: true });
    }
    for i in 1..n - 1 {
        if phi[i] > phi[i - 1] && phi[i] > phi[i + 1] {
            let (x, fx) = golden_max(
                math::ln(es[i - 1]),
                math::ln(es[i + 1]),
                REFINE_REL_TOL,
                |x| kernel.potential(params, math::exp(x)),
            )?;
            maxima.push(PotentialMaximum { e: math::exp(x), phi: fx, boundary: false });
        }
    }
    if phi[n - 1] > phi[n - 2] {
        maxima.push(PotentialMaximum { e: es[n - 1], phi: phi[n - 1], boundary: true });
    }
    Ok(PotentialCurve { grid: es, phi, maxima, plateau: false })
}

/// Centered-difference slope of Φ with respect to ln E, with relative step
/// `rel_step` (the evaluation points are E(1±rel_step)).
///
/// Stationarity checks use this scale-free form: dΦ/dln E = E·Φ′(E). The
/// plain Φ′ divides the same Φ difference by 2·rel_step·E, which at
/// low-MSE stationary points (E ~ 10⁻⁵ and below) amplifies the f64
/// representation noise of Φ by 1/E past any meaningful threshold, while
/// the logarithmic slope keeps the noise at ~|Φ|·ε/rel_step.
pub fn potential_log_slope(
    params: &ReplicaParams,
    e: f64,
    rel_step: f64,
) -> Result<f64, ReplicaError> {
    if !(rel_step > 0.0) || rel_step >= 1.0 {
        return Err(ReplicaError::InvalidParams("rel_step must lie in (0, 1)"));
    }
    let kernel = PotentialKernel::new();
    let hi = kernel.potential(params, (e * (1.0 + rel_step)).min(params.rho))?;
    let lo = kernel.potential(params, e * (1.0 - rel_step))?;
    Ok((hi - lo) / (2.0 * rel_step))
}

/// Location of the global maximum of Φ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BayesEstimate {
    /// The best achievable MSE, argmax Φ.
    pub mse: f64,
    pub phi: f64,
    /// Set when the maximizer sits on a grid endpoint.
    pub boundary: bool,
}

/// Best achievable MSE for the parameter set, from a default-grid scan.
pub fn bayes_mse(params: &ReplicaParams) -> Result<BayesEstimate, ReplicaError> {
    let curve = scan_potential(params, &GridSpec::default())?;
    global_maximum(&curve)
}

/// Pick the global maximum out of a scanned curve.
pub fn global_maximum(curve: &PotentialCurve) -> Result<BayesEstimate, ReplicaError> {
    if curve.plateau || curve.maxima.is_empty() {
        return Err(ReplicaError::DegeneratePlateau);
    }
    let best = curve
        .maxima
        .iter()
        .max_by(|a, b| a.phi.partial_cmp(&b.phi).unwrap())
        .expect("non-empty");
    Ok(BayesEstimate { mse: best.e, phi: best.phi, boundary: best.boundary })
}
