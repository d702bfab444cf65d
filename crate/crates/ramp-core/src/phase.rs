//! Phase classification and transition lines.
//!
//! A parameter point is classified from the shape of the potential and the
//! density-evolution fixed point: a single low-MSE maximum means the
//! solver reaches the best achievable error (`Easy`); an additional
//! high-MSE maximum traps the recursion started at E⁰ = ρ (`Hard`); once
//! the global maximum itself moves to the high-MSE branch no method does
//! better (`Impossible`). The boundary of Easy against the rest is the
//! spinodal line; the boundary where the global maximum switches branches
//! is the first-order line.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::math;
use crate::replica::{
    global_maximum, scan_potential, GridSpec, PotentialCurve, ReplicaError, ReplicaParams,
};
use crate::state_evolution::{de_run, StateEvolutionError, DEFAULT_MAX_ITERS, DEFAULT_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseClass {
    /// Single low-MSE maximum; the solver attains the optimum.
    Easy,
    /// Two or more maxima with the global one at low MSE; optimal
    /// reconstruction exists but the solver gets trapped.
    Hard,
    /// The global maximum sits at high MSE; no method recovers the signal.
    Impossible,
    /// Flat potential (full matrix uncertainty).
    Degenerate,
}

impl PhaseClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            PhaseClass::Easy => "easy",
            PhaseClass::Hard => "hard",
            PhaseClass::Impossible => "impossible",
            PhaseClass::Degenerate => "degenerate",
        }
    }
}

/// Classified parameter point.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub params: ReplicaParams,
    pub class: PhaseClass,
    /// Global argmax of the potential (NaN when degenerate).
    pub bayes_mse: f64,
    /// Density-evolution fixed point from E⁰ = ρ.
    pub amp_mse_predicted: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PhaseError {
    Replica { params: ReplicaParams, source: ReplicaError },
    StateEvolution { params: ReplicaParams, source: StateEvolutionError },
    /// Bracket endpoints classify identically; nothing to bisect.
    BracketSameClass { lo: f64, hi: f64, class: PhaseClass },
    /// A midpoint produced a class outside the bracket's pair.
    AmbiguousBracket { at: f64, class: PhaseClass },
    InvalidSweep(&'static str),
}

impl core::fmt::Display for PhaseError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            PhaseError::Replica { params, source } => write!(
                f,
                "potential failed at (alpha={}, rho={}, delta={:e}, eta={:e}): {source}",
                params.alpha(),
                params.rho(),
                params.delta(),
                params.eta()
            ),
            PhaseError::StateEvolution { params, source } => write!(
                f,
                "density evolution failed at (alpha={}, rho={}, delta={:e}, eta={:e}): {source}",
                params.alpha(),
                params.rho(),
                params.delta(),
                params.eta()
            ),
            PhaseError::BracketSameClass { lo, hi, class } => write!(
                f,
                "bracket endpoints {lo} and {hi} both classify as {}",
                class.as_str()
            ),
            PhaseError::AmbiguousBracket { at, class } => write!(
                f,
                "non-monotone classification: {} appeared inside the bracket at {at}",
                class.as_str()
            ),
            PhaseError::InvalidSweep(s) => write!(f, "{s}"),
        }
    }
}

impl core::error::Error for PhaseError {}

/// A maximum below 100·max(Δ, D·ρ, 10⁻¹⁰) counts as the low-MSE branch;
/// the cutoff scales with the noise levels because the attainable error
/// does.
pub fn low_mse_threshold(params: &ReplicaParams) -> f64 {
    100.0 * params.delta().max(params.info_loss() * params.rho()).max(1e-10)
}

fn classify_curve(params: &ReplicaParams, curve: &PotentialCurve) -> (PhaseClass, f64) {
    if curve.plateau || curve.maxima.is_empty() {
        return (PhaseClass::Degenerate, f64::NAN);
    }
    let global = global_maximum(curve).expect("non-plateau curve has maxima");
    let threshold = low_mse_threshold(params);
    let class = if global.mse >= threshold {
        PhaseClass::Impossible
    } else if curve.maxima.len() >= 2 {
        PhaseClass::Hard
    } else {
        PhaseClass::Easy
    };
    (class, global.mse)
}

/// Classify one parameter point (potential scan plus density evolution).
pub fn classify(params: &ReplicaParams) -> Result<PhasePoint, PhaseError> {
    let curve = scan_potential(params, &GridSpec::default())
        .map_err(|source| PhaseError::Replica { params: *params, source })?;
    let (class, bayes) = classify_curve(params, &curve);
    let de = de_run(params, DEFAULT_MAX_ITERS, DEFAULT_TOL)
        .map_err(|source| PhaseError::StateEvolution { params: *params, source })?;
    Ok(PhasePoint { params: *params, class, bayes_mse: bayes, amp_mse_predicted: de.fixed_point })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransitionKind {
    /// Appearance of the trapping high-MSE maximum: Easy vs Hard∪Impossible.
    Spinodal,
    /// The global maximum switches branches: (Easy∪Hard) vs Impossible.
    FirstOrder,
}

impl TransitionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            TransitionKind::Spinodal => "spinodal",
            TransitionKind::FirstOrder => "first_order",
        }
    }

    fn beyond(&self, class: PhaseClass) -> Result<bool, PhaseClass> {
        match (self, class) {
            (_, PhaseClass::Degenerate) => Err(class),
            (TransitionKind::Spinodal, c) => Ok(c != PhaseClass::Easy),
            (TransitionKind::FirstOrder, c) => Ok(c == PhaseClass::Impossible),
        }
    }
}

/// Which parameter a sweep or bisection moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Alpha,
    Rho,
    Delta,
    Eta,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::Alpha => "alpha",
            SweepAxis::Rho => "rho",
            SweepAxis::Delta => "delta",
            SweepAxis::Eta => "eta",
        }
    }

    pub fn with_value(&self, base: &ReplicaParams, v: f64) -> Result<ReplicaParams, ReplicaError> {
        match self {
            SweepAxis::Alpha => ReplicaParams::new(v, base.rho(), base.delta(), base.eta()),
            SweepAxis::Rho => ReplicaParams::new(base.alpha(), v, base.delta(), base.eta()),
            SweepAxis::Delta => ReplicaParams::new(base.alpha(), base.rho(), v, base.eta()),
            SweepAxis::Eta => ReplicaParams::new(base.alpha(), base.rho(), base.delta(), v),
        }
    }
}

/// Default relative bisection resolution in the swept parameter.
pub const DEFAULT_RESOLUTION: f64 = 1e-3;

/// Locate a transition by bisection on `axis` between `bracket.0` and
/// `bracket.1`, whose classifications must differ with respect to `kind`.
/// Stops when the bracket is narrower than `resolution` relative to its
/// upper end and returns the bracket midpoint.
pub fn find_transition(
    kind: TransitionKind,
    axis: SweepAxis,
    base: &ReplicaParams,
    bracket: (f64, f64),
    resolution: f64,
) -> Result<f64, PhaseError> {
    if !(resolution > 0.0) || resolution >= 1.0 {
        return Err(PhaseError::InvalidSweep("resolution must lie in (0, 1)"));
    }
    let (mut lo, mut hi) = bracket;
    if !(hi > lo) {
        return Err(PhaseError::InvalidSweep("bracket must satisfy lo < hi"));
    }
    let classify_at = |v: f64| -> Result<PhaseClass, PhaseError> {
        let p = axis
            .with_value(base, v)
            .map_err(|source| PhaseError::Replica { params: *base, source })?;
        Ok(classify(&p)?.class)
    };
    let class_lo = classify_at(lo)?;
    let beyond_lo = kind
        .beyond(class_lo)
        .map_err(|c| PhaseError::AmbiguousBracket { at: lo, class: c })?;
    let class_hi = classify_at(hi)?;
    let beyond_hi = kind
        .beyond(class_hi)
        .map_err(|c| PhaseError::AmbiguousBracket { at: hi, class: c })?;
    if beyond_lo == beyond_hi {
        return Err(PhaseError::BracketSameClass { lo, hi, class: class_hi });
    }
    while hi - lo > resolution * math::abs(hi) {
        let mid = 0.5 * (lo + hi);
        let class_mid = classify_at(mid)?;
        let beyond_mid = kind
            .beyond(class_mid)
            .map_err(|c| PhaseError::AmbiguousBracket { at: mid, class: c })?;
        if beyond_mid == beyond_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Refined transition points along a swept column family.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionLine {
    pub kind: TransitionKind,
    pub outer_axis: SweepAxis,
    pub inner_axis: SweepAxis,
    /// (outer value, critical inner value) pairs, only for columns where
    /// the transition is bracketed by the sampled points.
    pub points: Vec<(f64, f64)>,
}

/// One column of a phase sweep: a fixed outer value and the inner values
/// to classify.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepColumn {
    pub outer_value: f64,
    pub inner_values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: ReplicaParams,
    pub outer_axis: SweepAxis,
    pub inner_axis: SweepAxis,
    pub columns: Vec<SweepColumn>,
    /// Relative bisection resolution for line refinement.
    pub resolution: f64,
    /// Refine transition lines by per-column bisection.
    pub refine_lines: bool,
}

/// Grid classification plus extracted transition lines. Failures of
/// individual points are recorded and the sweep continues.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    /// Per column, per inner value: the classified point or the error text.
    pub points: Vec<Vec<Result<PhasePoint, String>>>,
    pub spinodal: TransitionLine,
    pub first_order: TransitionLine,
}

/// Classify every grid point and refine both transition lines per column.
pub fn sweep_phase_diagram(spec: &SweepSpec) -> Result<SweepOutcome, PhaseError> {
    if spec.columns.is_empty() {
        return Err(PhaseError::InvalidSweep("sweep needs at least one column"));
    }
    let classify_cell = |outer: f64, inner: f64| -> Result<PhasePoint, String> {
        let p = spec
            .outer_axis
            .with_value(&spec.base, outer)
            .and_then(|p| spec.inner_axis.with_value(&p, inner))
            .map_err(|e| format!("{e}"))?;
        classify(&p).map_err(|e| format!("{e}"))
    };

    let jobs: Vec<(usize, f64, f64)> = spec
        .columns
        .iter()
        .enumerate()
        .flat_map(|(ci, col)| {
            col.inner_values.iter().map(move |&v| (ci, col.outer_value, v))
        })
        .collect();

    #[cfg(feature = "parallel")]
    let flat: Vec<Result<PhasePoint, String>> = {
        use rayon::prelude::*;
        jobs.par_iter().map(|&(_, o, i)| classify_cell(o, i)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let flat: Vec<Result<PhasePoint, String>> =
        jobs.iter().map(|&(_, o, i)| classify_cell(o, i)).collect();

    let mut points: Vec<Vec<Result<PhasePoint, String>>> =
        spec.columns.iter().map(|_| Vec::new()).collect();
    for ((ci, _, _), cell) in jobs.into_iter().zip(flat) {
        points[ci].push(cell);
    }

    let mut spinodal = TransitionLine {
        kind: TransitionKind::Spinodal,
        outer_axis: spec.outer_axis,
        inner_axis: spec.inner_axis,
        points: Vec::new(),
    };
    let mut first_order = TransitionLine {
        kind: TransitionKind::FirstOrder,
        outer_axis: spec.outer_axis,
        inner_axis: spec.inner_axis,
        points: Vec::new(),
    };
    if spec.refine_lines {
        for (col, cells) in spec.columns.iter().zip(&points) {
            let base = match spec.outer_axis.with_value(&spec.base, col.outer_value) {
                Ok(b) => b,
                Err(_) => continue,
            };
            for (kind, line) in [
                (TransitionKind::Spinodal, &mut spinodal),
                (TransitionKind::FirstOrder, &mut first_order),
            ] {
                if let Some((lo, hi)) = bracket_from_column(kind, col, cells) {
                    if let Ok(v) =
                        find_transition(kind, spec.inner_axis, &base, (lo, hi), spec.resolution)
                    {
                        line.points.push((col.outer_value, v));
                    }
                }
            }
        }
    }
    Ok(SweepOutcome { points, spinodal, first_order })
}

fn bracket_from_column(
    kind: TransitionKind,
    col: &SweepColumn,
    cells: &[Result<PhasePoint, String>],
) -> Option<(f64, f64)> {
    let mut prev: Option<(f64, bool)> = None;
    for (v, cell) in col.inner_values.iter().zip(cells) {
        let class = cell.as_ref().ok()?.class;
        let beyond = kind.beyond(class).ok()?;
        if let Some((pv, pb)) = prev {
            if pb != beyond {
                return Some((pv.min(*v), pv.max(*v)));
            }
        }
        prev = Some((*v, beyond));
    }
    None
}
