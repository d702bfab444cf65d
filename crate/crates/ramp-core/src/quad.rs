//! Fixed-node Gaussian quadrature.
//!
//! All the integrals in this crate are smooth one-dimensional expectations
//! against a Gaussian weight. They are evaluated with composite
//! Gauss-Legendre rules over panels chosen by the caller (who knows where
//! its integrand varies), and every production evaluation is verified by
//! doubling the per-panel order until the value stops moving.

use alloc::vec::Vec;

use crate::math;

/// Gauss-Legendre rule on [-1, 1].
///
/// Nodes are the roots of the degree-n Legendre polynomial, found by
/// Newton iteration from the Chebyshev initial guesses; accurate to a few
/// ulp for any order used here.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2, "rule order must be at least 2");
        let mut nodes = alloc::vec![0.0; n];
        let mut weights = alloc::vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = math::cos(core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5));
            let mut dp = 0.0;
            for _ in 0..100 {
                // evaluate P_n and P_n' by the three-term recurrence
                let mut p0 = 1.0;
                let mut p1 = x;
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if math::abs(dx) < 1e-15 {
                    break;
                }
            }
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// ∫_lo^hi f(x) dx with this rule on a single panel.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, lo: f64, hi: f64, mut f: F) -> f64 {
        let c = 0.5 * (hi + lo);
        let h = 0.5 * (hi - lo);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(c + h * x);
        }
        acc * h
    }

    /// Composite integral over consecutive panels `[edges[0], edges[1]], …`.
    pub fn integrate_panels<F: FnMut(f64) -> f64>(&self, edges: &[f64], mut f: F) -> f64 {
        let mut acc = 0.0;
        for pair in edges.windows(2) {
            if pair[1] > pair[0] {
                acc += self.integrate(pair[0], pair[1], &mut f);
            }
        }
        acc
    }
}

/// A ladder of Gauss-Legendre rules of doubling order, built once and
/// shared across many integrand evaluations.
#[derive(Debug, Clone)]
pub struct RuleLadder {
    rules: Vec<GaussLegendre>,
}

/// Failure of the order-doubling convergence check.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadError {
    /// Last value computed.
    pub value: f64,
    /// Relative change between the two finest rules tried.
    pub last_change: f64,
    /// Relative tolerance that was requested.
    pub rel_tol: f64,
}

impl core::fmt::Display for QuadError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(
            f,
            "quadrature did not converge: last value {:e}, relative change {:e} > {:e}",
            self.value, self.last_change, self.rel_tol
        )
    }
}

impl core::error::Error for QuadError {}

impl RuleLadder {
    /// Orders 32, 64, 128, 256, 512 per panel.
    pub fn standard() -> Self {
        RuleLadder {
            rules: [32, 64, 128, 256, 512].iter().map(|&n| GaussLegendre::new(n)).collect(),
        }
    }

    /// Evaluate a panel integral with doubling per-panel order until two
    /// consecutive values agree to `rel_tol` relative to
    /// `max(|value|, scale_floor)`.
    pub fn converge<F: FnMut(f64) -> f64>(
        &self,
        edges: &[f64],
        rel_tol: f64,
        scale_floor: f64,
        mut f: F,
    ) -> Result<f64, QuadError> {
        let mut prev = self.rules[0].integrate_panels(edges, &mut f);
        let mut last_change = f64::INFINITY;
        for rule in &self.rules[1..] {
            let next = rule.integrate_panels(edges, &mut f);
            let diff = math::abs(next - prev);
            let scale = math::abs(next).max(scale_floor);
            if diff <= rel_tol * scale {
                return Ok(next);
            }
            last_change = diff / scale.max(f64::MIN_POSITIVE);
            prev = next;
        }
        Err(QuadError { value: prev, last_change, rel_tol })
    }
}

/// Expectation of an even integrand under the standard normal measure:
/// 2 ∫_0^∞ φ(z) f(z) dz over the given panel edges (which must start at 0).
pub fn normal_expectation_even<F: FnMut(f64) -> f64>(
    ladder: &RuleLadder,
    edges: &[f64],
    rel_tol: f64,
    scale_floor: f64,
    mut f: F,
) -> Result<f64, QuadError> {
    ladder
        .converge(edges, rel_tol, scale_floor, |z| math::normal_pdf(z) * f(z))
        .map(|v| 2.0 * v)
}

/// Merge extra breakpoints into a base panel layout, keeping edges sorted,
/// deduplicated and clipped to `[lo, hi]`.
pub fn merge_edges(base: &[f64], extra: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let mut edges: Vec<f64> = base
        .iter()
        .chain(extra.iter())
        .copied()
        .filter(|x| x.is_finite() && *x >= lo && *x <= hi)
        .collect();
    edges.push(lo);
    edges.push(hi);
    edges.sort_by(|a, b| a.partial_cmp(b).unwrap());
    edges.dedup_by(|a, b| math::abs(*a - *b) < 1e-300);
    edges
}
