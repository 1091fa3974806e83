//! Fixed test-function suite and the score identity checks built on it.

use serde::Serialize;

use super::univariate::DensityModel1D;
use crate::error::{Error, Result};
use crate::numerics::quadrature::{gauss_kronrod, QuadResult, QuadratureSpec};
use crate::scalar::Real;

/// `u^degree * exp(-1 / (1 - u^2))` with `u = (x - center) / radius`,
/// zero outside `|u| < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BumpPolynomial<T> {
    pub center: T,
    pub radius: T,
    pub degree: u32,
}

impl<T: Real> BumpPolynomial<T> {
    fn parts(&self, x: T) -> Option<(T, T, T)> {
        let u = (x - self.center) / self.radius;
        let q = T::one() - u * u;
        if !(q > T::zero()) {
            return None;
        }
        let psi = (-T::one() / q).exp();
        let dpsi = psi * (-T::c(2.0) * u / (q * q));
        Some((u, psi, dpsi))
    }

    pub fn value(&self, x: T) -> T {
        match self.parts(x) {
            Some((u, psi, _)) => u.powi(self.degree as i32) * psi,
            None => T::zero(),
        }
    }

    pub fn derivative(&self, x: T) -> T {
        match self.parts(x) {
            Some((u, psi, dpsi)) => {
                let p = u.powi(self.degree as i32);
                let dp = if self.degree == 0 {
                    T::zero()
                } else {
                    T::from_usize_lossy(self.degree as usize) * u.powi(self.degree as i32 - 1)
                };
                (dp * psi + p * dpsi) / self.radius
            }
            None => T::zero(),
        }
    }

    pub fn lo(&self) -> T {
        self.center - self.radius
    }

    pub fn hi(&self) -> T {
        self.center + self.radius
    }
}

/// Test functions for `model`: polynomials of degree 0..=3 times a bump on
/// the central window of the support and on its two halves. Every function
/// is compactly supported in the open interior of the support.
pub fn test_suite<T: Real>(model: &DensityModel1D<T>) -> Vec<BumpPolynomial<T>> {
    let s = model.support();
    let lo = s.lo().max(T::c(-3.0));
    let hi = s.hi().min(T::c(3.0));
    let c = (lo + hi) / T::c(2.0);
    let r = (hi - lo) / T::c(2.0) * T::c(0.98);
    let windows = [
        (c, r),
        (c - r / T::c(2.0), r / T::c(2.0)),
        (c + r / T::c(2.0), r / T::c(2.0)),
    ];
    let mut out = Vec::new();
    for (center, radius) in windows {
        for degree in 0..=3 {
            out.push(BumpPolynomial { center, radius, degree });
        }
    }
    out
}

fn range_breaks<T: Real>(model: &DensityModel1D<T>, lo: T, hi: T) -> Vec<T> {
    let mut b = model.breakpoints();
    for v in [-10.0, -4.0, -1.0, 0.0, 1.0, 4.0, 10.0] {
        b.push(T::c(v));
    }
    b.retain(|&x| x > lo && x < hi);
    b
}

/// `E[g(X)]` for a vector of integrands by adaptive Gauss-Kronrod over the
/// effective range of the model.
pub fn expectation<T: Real, const K: usize>(
    model: &DensityModel1D<T>,
    g: impl Fn(T) -> [T; K],
    spec: &QuadratureSpec<T>,
) -> Result<[T; K]> {
    let (lo, hi) = model.effective_range();
    expectation_on(model, g, lo, hi, spec)
}

pub(crate) fn expectation_on<T: Real, const K: usize>(
    model: &DensityModel1D<T>,
    g: impl Fn(T) -> [T; K],
    lo: T,
    hi: T,
    spec: &QuadratureSpec<T>,
) -> Result<[T; K]> {
    Ok(expectation_result(model, g, lo, hi, spec)?.value)
}

/// As [`expectation`] on `[lo, hi]`, keeping the error estimate.
pub(crate) fn expectation_result<T: Real, const K: usize>(
    model: &DensityModel1D<T>,
    g: impl Fn(T) -> [T; K],
    lo: T,
    hi: T,
    spec: &QuadratureSpec<T>,
) -> Result<QuadResult<T, K>> {
    let breaks = range_breaks(model, lo, hi);
    gauss_kronrod(
        |x| {
            let f = model.pdf(x);
            let mut v = g(x);
            for e in v.iter_mut() {
                *e = if f > T::zero() { *e * f } else { T::zero() };
            }
            v
        },
        lo,
        hi,
        &breaks,
        spec,
    )
}

/// Residual of the score identity for one test function.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityResidual<T> {
    pub function: BumpPolynomial<T>,
    pub lhs: T,
    pub rhs: T,
    pub residual: T,
}

/// `max |E[rho(X) phi(X)] + E[phi'(X)]|` over the suite, with per-function detail.
pub fn verify_score_identity<T: Real>(
    model: &DensityModel1D<T>,
    suite: &[BumpPolynomial<T>],
    spec: &QuadratureSpec<T>,
) -> Result<(T, Vec<IdentityResidual<T>>)> {
    let mut rows = Vec::with_capacity(suite.len());
    let mut worst = T::zero();
    for phi in suite {
        let r = expectation_on(
            model,
            |x| [model.score_interior(x) * phi.value(x), phi.derivative(x)],
            phi.lo(),
            phi.hi(),
            spec,
        )
        .map_err(|e| {
            Error::numeric(
                "score identity",
                format!("{} with {:?}: {e}", model.name(), phi),
            )
        })?;
        let residual = (r[0] + r[1]).abs();
        if !residual.is_finite() {
            return Err(Error::numeric("score identity", "non-finite residual"));
        }
        worst = worst.max(residual);
        rows.push(IdentityResidual { function: *phi, lhs: r[0], rhs: -r[1], residual });
    }
    Ok((worst, rows))
}

/// Split of a score moment `E[rho(X) g(X)]` into the integral over the
/// interior of the support and the contribution of density jumps at the
/// boundary (the atoms of the distributional derivative of `f`).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScoreMoment<T> {
    pub interior: T,
    pub boundary: T,
    pub total: T,
}

#[derive(Debug, Clone, Serialize)]
pub struct MomentReport<T> {
    pub mass: T,
    pub mean: T,
    pub variance: T,
    /// `E[rho(X)]`, expected 0.
    pub score_mean: ScoreMoment<T>,
    /// `E[rho(X) X]`, expected -1.
    pub score_cross: ScoreMoment<T>,
}

/// The moment identities `int f = 1`, `E[X] = 0`, `E[rho] = 0`, `E[rho X] = -1`.
pub fn moment_identities<T: Real>(
    model: &DensityModel1D<T>,
    spec: &QuadratureSpec<T>,
) -> Result<MomentReport<T>> {
    let m = expectation(
        model,
        |x| {
            let s = model.score_interior(x);
            [T::one(), x, x * x, s, s * x]
        },
        spec,
    )?;
    let jumps = model.density_jumps();
    let b0: T = jumps.iter().map(|&(_, j)| j).sum();
    let b1: T = jumps.iter().map(|&(x, j)| x * j).sum();
    // int g f' = int_interior g rho f + sum g(x_j) (f(x_j+) - f(x_j-))
    let split = |interior: T, boundary: T| ScoreMoment { interior, boundary, total: interior + boundary };
    Ok(MomentReport {
        mass: m[0],
        mean: m[1],
        variance: m[2] - m[1] * m[1],
        score_mean: split(m[3], b0),
        score_cross: split(m[4], b1),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::register_standard_models;

    #[test]
    fn bump_derivative_matches_finite_difference() {
        let phi = BumpPolynomial { center: 0.3_f64, radius: 1.7, degree: 3 };
        let h = 1e-6;
        for x in [-1.0, 0.0, 0.5, 1.5] {
            let fd = (phi.value(x + h) - phi.value(x - h)) / (2.0 * h);
            assert!((phi.derivative(x) - fd).abs() < 1e-7);
        }
        assert_eq!(phi.value(2.0), 0.0);
    }

    #[test]
    fn suite_stays_inside_support() {
        for m in register_standard_models::<f64>() {
            for phi in test_suite(&m) {
                assert!(phi.lo() > m.support().lo() && phi.hi() < m.support().hi());
            }
        }
    }

    #[test]
    fn gaussian_bump_identity() {
        let g = DensityModel1D::<f64>::gaussian();
        let suite = test_suite(&g);
        let (worst, _) = verify_score_identity(&g, &suite[..1], &QuadratureSpec::default()).unwrap();
        assert!(worst < 1e-8);
    }

    #[test]
    fn exponential_boundary_atoms_restore_moment_identities() {
        let e = DensityModel1D::<f64>::exp_centered();
        let r = moment_identities(&e, &QuadratureSpec::default()).unwrap();
        assert!((r.score_mean.interior + 1.0).abs() < 1e-10);
        assert!(r.score_mean.total.abs() < 1e-10);
        assert!((r.score_cross.total + 1.0).abs() < 1e-10);
    }
}
