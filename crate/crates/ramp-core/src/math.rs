//! Scalar helpers shared across the crate.
//!
//! Float transcendentals dispatch to the std intrinsics when available and
//! to `libm` in `no_std` builds.

#[cfg(feature = "std")]
mod fm {
    #[inline(always)]
    pub fn exp(x: f64) -> f64 {
        x.exp()
    }
    #[inline(always)]
    pub fn ln(x: f64) -> f64 {
        x.ln()
    }
    #[inline(always)]
    pub fn ln_1p(x: f64) -> f64 {
        x.ln_1p()
    }
    #[inline(always)]
    pub fn sqrt(x: f64) -> f64 {
        x.sqrt()
    }
    #[inline(always)]
    pub fn abs(x: f64) -> f64 {
        x.abs()
    }
    #[inline(always)]
    pub fn cos(x: f64) -> f64 {
        x.cos()
    }
    #[inline(always)]
    pub fn round(x: f64) -> f64 {
        x.round()
    }
}

#[cfg(not(feature = "std"))]
mod fm {
    #[inline(always)]
    pub fn exp(x: f64) -> f64 {
        libm::exp(x)
    }
    #[inline(always)]
    pub fn ln(x: f64) -> f64 {
        libm::log(x)
    }
    #[inline(always)]
    pub fn ln_1p(x: f64) -> f64 {
        libm::log1p(x)
    }
    #[inline(always)]
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }
    #[inline(always)]
    pub fn abs(x: f64) -> f64 {
        libm::fabs(x)
    }
    #[inline(always)]
    pub fn cos(x: f64) -> f64 {
        libm::cos(x)
    }
    #[inline(always)]
    pub fn round(x: f64) -> f64 {
        libm::round(x)
    }
}

pub use fm::{abs, cos, exp, ln, ln_1p, round, sqrt};

/// log(2π)/2, the normalizing constant of the standard normal log-density.
pub const HALF_LN_TWO_PI: f64 = 0.918_938_533_204_672_7;

/// Standard normal density φ(z).
#[inline]
pub fn normal_pdf(z: f64) -> f64 {
    exp(-0.5 * z * z - HALF_LN_TWO_PI)
}

/// `ln(exp(a) + exp(b))` without overflow; tolerates `-inf` arguments.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a >= b {
        a + ln_1p(exp(b - a))
    } else {
        b + ln_1p(exp(a - b))
    }
}

/// Logistic function 1/(1+e^{-t}), saturating exactly to 0 or 1 for
/// |t| > 700 so downstream products never see an overflowed exponential.
#[inline]
pub fn logistic_saturating(t: f64) -> f64 {
    if t > 700.0 {
        1.0
    } else if t < -700.0 {
        0.0
    } else {
        1.0 / (1.0 + exp(-t))
    }
}

/// Mean of a slice; 0 for an empty slice.
#[inline]
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mean squared difference of two equal-length slices.
#[inline]
pub fn mean_sq_diff(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if a.is_empty() {
        return 0.0;
    }
    let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    s / a.len() as f64
}
