//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar: `f32` or `f64`.
///
/// Analytic constants are written as `f64` literals and converted through
/// [`Real::c`]; random draws are produced in `f64` and converted the same way.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` constant.
    #[inline]
    fn c(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    #[inline]
    fn f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Smallest positive normal value used as a density positivity floor.
    fn density_floor() -> Self;
}

impl Real for f64 {
    fn density_floor() -> Self {
        1e-300
    }
}

impl Real for f32 {
    fn density_floor() -> Self {
        1e-37
    }
}

/// Standard normal density.
#[inline]
pub fn std_normal_pdf<T: Real>(x: T) -> T {
    (-(x * x) / T::c(2.0)).exp() / (T::c(2.0) * T::PI()).sqrt()
}

/// Standard normal log density.
#[inline]
pub fn std_normal_log_pdf<T: Real>(x: T) -> T {
    -(x * x) / T::c(2.0) - T::c(0.5) * (T::c(2.0) * T::PI()).ln()
}

/// Standard normal CDF, accurate in both tails.
#[inline]
pub fn std_normal_cdf<T: Real>(x: T) -> T {
    T::c(0.5 * libm::erfc(-x.f64() / std::f64::consts::SQRT_2))
}

/// Upper tail `1 - Phi(x)` without cancellation.
#[inline]
pub fn std_normal_sf<T: Real>(x: T) -> T {
    T::c(0.5 * libm::erfc(x.f64() / std::f64::consts::SQRT_2))
}

/// `log(exp(a) + exp(b))` without overflow.
#[inline]
pub fn log_add_exp<T: Real>(a: T, b: T) -> T {
    if a == T::neg_infinity() {
        return b;
    }
    if b == T::neg_infinity() {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_helpers_agree() {
        let x = 0.7_f64;
        assert!((std_normal_pdf(x).ln() - std_normal_log_pdf(x)).abs() < 1e-14);
        assert!((std_normal_cdf(x) + std_normal_sf(x) - 1.0).abs() < 1e-15);
        assert!((std_normal_cdf(0.0_f64) - 0.5).abs() < 1e-16);
        assert!((std_normal_pdf(0.3_f32) - 0.381_387_8).abs() < 1e-6);
    }

    #[test]
    fn log_add_exp_is_stable() {
        let v = log_add_exp(1000.0_f64, 1000.0);
        assert!((v - (1000.0 + 2.0_f64.ln())).abs() < 1e-12);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 3.0), 3.0);
    }
}
