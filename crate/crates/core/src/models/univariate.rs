use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use super::smoothed::SmoothedLaw;
use super::support::Support;
use crate::error::{Error, Result};
use crate::numerics::density::Density1D;
use crate::scalar::{log_add_exp, std_normal_cdf, std_normal_log_pdf, std_normal_pdf, Real};

/// Concrete law behind a [`DensityModel1D`].
#[derive(Debug, Clone)]
pub enum Family<T: Real> {
    /// Standard normal.
    Gaussian,
    /// Uniform on `[-sqrt(3), sqrt(3)]`.
    Uniform,
    /// `Exp(1) - 1`, supported on `(-1, inf)`.
    ExpCentered,
    /// Laplace with scale `b = 1/sqrt(2)` (unit variance).
    Laplace,
    /// `(N(-mu, sigma^2) + N(mu, sigma^2)) / 2` with `mu^2 + sigma^2 = 1`.
    GaussMixture { mu: T, sigma: T },
    /// `sqrt(t0) X + sqrt(1 - t0) Z` for a base law `X` and independent standard normal `Z`.
    Smoothed(Arc<SmoothedLaw<T>>),
}

/// A centered, unit-variance univariate law with exact density, score,
/// CDF and sampler.
#[derive(Debug, Clone)]
pub struct DensityModel1D<T: Real> {
    name: String,
    family: Family<T>,
    support: Support<T>,
}

fn sqrt3<T: Real>() -> T {
    T::c(3.0).sqrt()
}

fn laplace_b<T: Real>() -> T {
    T::c(0.5).sqrt()
}

impl<T: Real> DensityModel1D<T> {
    pub fn gaussian() -> Self {
        Self {
            name: "gaussian".into(),
            family: Family::Gaussian,
            support: Support::full_line(),
        }
    }

    pub fn uniform() -> Self {
        Self {
            name: "uniform".into(),
            family: Family::Uniform,
            support: Support::new(-sqrt3::<T>(), sqrt3::<T>()).expect("valid support"),
        }
    }

    pub fn exp_centered() -> Self {
        Self {
            name: "exp_centered".into(),
            family: Family::ExpCentered,
            support: Support::new(-T::one(), T::infinity()).expect("valid support"),
        }
    }

    pub fn laplace() -> Self {
        Self {
            name: "laplace".into(),
            family: Family::Laplace,
            support: Support::full_line(),
        }
    }

    /// Symmetric two-component mixture standardized to unit variance: the
    /// component standard deviation is `sqrt(1 - mu^2)`.
    pub fn gauss_mixture(mu: T) -> Result<Self> {
        if !(mu > T::zero() && mu < T::one()) {
            return Err(Error::InvalidParameter(format!(
                "mixture offset must lie in (0, 1), got {mu}"
            )));
        }
        Ok(Self {
            name: "gauss_mixture".into(),
            family: Family::GaussMixture {
                mu,
                sigma: (T::one() - mu * mu).sqrt(),
            },
            support: Support::full_line(),
        })
    }

    /// Gaussian smoothing `sqrt(t0) X + sqrt(1 - t0) Z` of `base`. Nested
    /// smoothings collapse into one.
    pub fn smoothed(base: &DensityModel1D<T>, t0: T) -> Result<Self> {
        if !(t0 > T::zero() && t0 < T::one()) {
            return Err(Error::InvalidParameter(format!(
                "smoothing parameter must lie in (0, 1), got {t0}"
            )));
        }
        let (root, t) = match &base.family {
            Family::Smoothed(law) => (law.base().clone(), law.t0() * t0),
            _ => (base.clone(), t0),
        };
        let law = SmoothedLaw::new(root, t)?;
        Ok(Self {
            name: format!("smoothed:{}:{}", law.base().name(), t.f64()),
            family: Family::Smoothed(Arc::new(law)),
            support: Support::full_line(),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn family(&self) -> &Family<T> {
        &self.family
    }

    pub fn support(&self) -> Support<T> {
        self.support
    }

    pub fn mean(&self) -> T {
        T::zero()
    }

    pub fn variance(&self) -> T {
        T::one()
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.family, Family::Gaussian)
    }

    /// Whether the density vanishes continuously at every finite support
    /// endpoint, so the integration-by-parts score identity holds for all
    /// smooth compactly supported test functions on the real line.
    pub fn regular_score(&self) -> bool {
        !matches!(self.family, Family::Uniform | Family::ExpCentered)
    }

    /// Jumps `f(x+) - f(x-)` of the density at boundary points.
    pub fn density_jumps(&self) -> Vec<(T, T)> {
        match self.family {
            Family::Uniform => {
                let h = T::one() / (T::c(2.0) * sqrt3::<T>());
                vec![(-sqrt3::<T>(), h), (sqrt3::<T>(), -h)]
            }
            Family::ExpCentered => vec![(-T::one(), T::one())],
            _ => Vec::new(),
        }
    }

    pub fn has_closed_form_kernel(&self) -> bool {
        matches!(
            self.family,
            Family::Gaussian | Family::Uniform | Family::ExpCentered | Family::Laplace
        )
    }

    pub fn pdf(&self, x: T) -> T {
        match &self.family {
            Family::Gaussian => std_normal_pdf(x),
            Family::Smoothed(law) => law.pdf(x),
            _ => {
                if self.support.contains_interior(x) {
                    self.log_pdf(x).exp()
                } else {
                    T::zero()
                }
            }
        }
    }

    pub fn log_pdf(&self, x: T) -> T {
        if !self.support.contains_interior(x) && !matches!(self.family, Family::Gaussian) {
            if let Family::Smoothed(law) = &self.family {
                return law.log_pdf(x);
            }
            return T::neg_infinity();
        }
        match &self.family {
            Family::Gaussian => std_normal_log_pdf(x),
            Family::Uniform => -(T::c(2.0) * sqrt3::<T>()).ln(),
            Family::ExpCentered => -(x + T::one()),
            Family::Laplace => {
                let b = laplace_b::<T>();
                -(T::c(2.0) * b).ln() - x.abs() / b
            }
            Family::GaussMixture { mu, sigma } => {
                let l1 = std_normal_log_pdf((x - *mu) / *sigma);
                let l2 = std_normal_log_pdf((x + *mu) / *sigma);
                log_add_exp(l1, l2) - T::c(2.0).ln() - sigma.ln()
            }
            Family::Smoothed(law) => law.log_pdf(x),
        }
    }

    /// Score `d/dx log f(x)` on the open interior of the support.
    pub fn score(&self, x: T) -> Result<T> {
        if !self.support.contains_interior(x) || !x.is_finite() {
            return Err(Error::Domain {
                coordinate: 0,
                value: x.f64(),
            });
        }
        Ok(self.score_interior(x))
    }

    pub(crate) fn score_interior(&self, x: T) -> T {
        match &self.family {
            Family::Gaussian => -x,
            Family::Uniform => T::zero(),
            Family::ExpCentered => -T::one(),
            Family::Laplace => {
                if x == T::zero() {
                    T::zero()
                } else {
                    -x.signum() / laplace_b::<T>()
                }
            }
            Family::GaussMixture { mu, sigma } => {
                let s2 = *sigma * *sigma;
                let l1 = std_normal_log_pdf((x - *mu) / *sigma);
                let l2 = std_normal_log_pdf((x + *mu) / *sigma);
                // responsibility of the +mu component
                let r = T::one() / (T::one() + (l2 - l1).exp());
                let m = r * *mu - (T::one() - r) * *mu;
                -(x - m) / s2
            }
            Family::Smoothed(law) => law.score(x),
        }
    }

    pub fn cdf(&self, x: T) -> T {
        if x <= self.support.lo() {
            return T::zero();
        }
        if x >= self.support.hi() {
            return T::one();
        }
        match &self.family {
            Family::Gaussian => std_normal_cdf(x),
            Family::Uniform => (x + sqrt3::<T>()) / (T::c(2.0) * sqrt3::<T>()),
            Family::ExpCentered => T::one() - (-(x + T::one())).exp(),
            Family::Laplace => {
                let b = laplace_b::<T>();
                if x < T::zero() {
                    T::c(0.5) * (x / b).exp()
                } else {
                    T::one() - T::c(0.5) * (-x / b).exp()
                }
            }
            Family::GaussMixture { mu, sigma } => {
                T::c(0.5) * (std_normal_cdf((x - *mu) / *sigma) + std_normal_cdf((x + *mu) / *sigma))
            }
            Family::Smoothed(law) => law.cdf(x),
        }
    }

    /// Closed-form canonical Stein kernel `f(x)^{-1} int_x^inf y f(y) dy`,
    /// when one is registered for this family.
    pub fn closed_form_kernel(&self, x: T) -> Option<T> {
        match self.family {
            Family::Gaussian => Some(T::one()),
            Family::Uniform => Some((T::c(3.0) - x * x) / T::c(2.0)),
            Family::ExpCentered => Some(x + T::one()),
            Family::Laplace => {
                let b = laplace_b::<T>();
                Some(b * x.abs() + b * b)
            }
            _ => None,
        }
    }

    /// Interior points where the density or its derivative is not smooth,
    /// plus finite support endpoints.
    pub fn breakpoints(&self) -> Vec<T> {
        let mut b = self.support.finite_endpoints();
        if matches!(self.family, Family::Laplace) {
            b.push(T::zero());
        }
        b
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> T {
        T::c(self.sample_f64(rng))
    }

    pub fn sample_f64<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.family {
            Family::Gaussian => StandardNormal.sample(rng),
            Family::Uniform => (2.0 * rng.random::<f64>() - 1.0) * 3.0_f64.sqrt(),
            Family::ExpCentered => {
                let e: f64 = Exp1.sample(rng);
                e - 1.0
            }
            Family::Laplace => {
                let e: f64 = Exp1.sample(rng);
                let b = 0.5_f64.sqrt();
                if rng.random::<bool>() {
                    b * e
                } else {
                    -b * e
                }
            }
            Family::GaussMixture { mu, sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                let m = if rng.random::<bool>() { mu.f64() } else { -mu.f64() };
                m + sigma.f64() * z
            }
            Family::Smoothed(law) => {
                let x = law.base().sample_f64(rng);
                let z: f64 = StandardNormal.sample(rng);
                law.sqrt_t0().f64() * x + law.noise_sd().f64() * z
            }
        }
    }

    /// Finite interval outside of which the mass is negligible, used to
    /// truncate integrals: 40 standard deviations for exponential tails,
    /// 14 component standard deviations for Gaussian ones.
    pub fn effective_range(&self) -> (T, T) {
        let (lo, hi) = match &self.family {
            Family::Gaussian => (T::c(-14.0), T::c(14.0)),
            Family::GaussMixture { mu, sigma } => {
                let r = *mu + T::c(14.0) * *sigma;
                (-r, r)
            }
            Family::Smoothed(law) => return law.range(),
            _ => (T::c(-40.0), T::c(40.0)),
        };
        (self.support.lo().max(lo), self.support.hi().min(hi))
    }
}

impl<T: Real> Density1D<T> for DensityModel1D<T> {
    fn pdf(&self, x: T) -> T {
        DensityModel1D::pdf(self, x)
    }

    fn pdf_derivative(&self, x: T) -> T {
        match &self.family {
            Family::Smoothed(law) => law.pdf_derivative(x),
            _ => {
                let f = DensityModel1D::pdf(self, x);
                if f > T::zero() {
                    f * self.score_interior(x)
                } else {
                    T::zero()
                }
            }
        }
    }

    fn jumps(&self) -> Vec<(T, T)> {
        self.density_jumps()
    }

    fn support(&self) -> Support<T> {
        self.support
    }

    fn breakpoints(&self) -> Vec<T> {
        DensityModel1D::breakpoints(self)
    }

    fn mean(&self) -> T {
        T::zero()
    }

    fn variance(&self) -> T {
        T::one()
    }

    fn effective_range(&self) -> (T, T) {
        DensityModel1D::effective_range(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all() -> Vec<DensityModel1D<f64>> {
        vec![
            DensityModel1D::gaussian(),
            DensityModel1D::uniform(),
            DensityModel1D::exp_centered(),
            DensityModel1D::laplace(),
            DensityModel1D::gauss_mixture(0.8).unwrap(),
        ]
    }

    #[test]
    fn gaussian_score_is_minus_identity() {
        let g = DensityModel1D::<f64>::gaussian();
        for x in [-3.0, -0.2, 0.0, 1.7] {
            assert_eq!(g.score(x).unwrap(), -x);
        }
    }

    #[test]
    fn exponential_density_and_score() {
        let e = DensityModel1D::<f64>::exp_centered();
        assert_eq!(e.support().lo(), -1.0);
        assert!(e.support().hi().is_infinite());
        assert!((e.pdf(0.5) - (-1.5_f64).exp()).abs() < 1e-15);
        assert_eq!(e.score(0.0).unwrap(), -1.0);
        assert_eq!(e.pdf(-1.5), 0.0);
    }

    #[test]
    fn uniform_endpoints_match_unit_variance() {
        let u = DensityModel1D::<f64>::uniform();
        let (a, b) = (u.support().lo(), u.support().hi());
        assert!(((b - a) * (b - a) / 12.0 - 1.0).abs() < 1e-15);
        assert!((b - 3.0_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn score_outside_support_names_coordinate() {
        let e = DensityModel1D::<f64>::exp_centered();
        match e.score(-2.0) {
            Err(Error::Domain { coordinate, value }) => {
                assert_eq!(coordinate, 0);
                assert_eq!(value, -2.0);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(DensityModel1D::<f64>::uniform().score(2.0).is_err());
    }

    #[test]
    fn mixture_score_matches_finite_difference() {
        let m = DensityModel1D::<f64>::gauss_mixture(0.8).unwrap();
        let h = 1e-5;
        for x in [0.0, 0.37, -1.2, 2.5] {
            let fd = (m.log_pdf(x + h) - m.log_pdf(x - h)) / (2.0 * h);
            assert!((m.score(x).unwrap() - fd).abs() < 1e-6, "x={x}");
        }
    }

    #[test]
    fn scores_match_finite_differences_on_interior_grid() {
        for m in all() {
            let (lo, hi) = (m.support().lo().max(-4.0), m.support().hi().min(4.0));
            for k in 1..=100 {
                let x = lo + (hi - lo) * (k as f64 - 0.5) / 100.0;
                if x.abs() < 1e-3 {
                    continue; // Laplace kink
                }
                let h = 1e-6;
                let fd = (m.log_pdf(x + h) - m.log_pdf(x - h)) / (2.0 * h);
                assert!((m.score(x).unwrap() - fd).abs() < 1e-5, "{} at {x}", m.name());
            }
        }
    }

    #[test]
    fn cdf_is_monotone_and_normalized() {
        for m in all() {
            let mut prev = 0.0;
            for k in -80..=80 {
                let c = m.cdf(k as f64 / 10.0);
                assert!(c >= prev - 1e-15, "{}", m.name());
                prev = c;
            }
            assert!((m.cdf(40.0) - 1.0).abs() < 1e-12);
            assert!(m.cdf(-40.0) < 1e-12);
        }
    }

    #[test]
    fn mixture_offset_validated() {
        assert!(DensityModel1D::<f64>::gauss_mixture(1.2).is_err());
        assert!(DensityModel1D::<f64>::gauss_mixture(0.0).is_err());
    }

    #[test]
    fn single_precision_models() {
        let u = DensityModel1D::<f32>::uniform();
        assert!((u.closed_form_kernel(1.0).unwrap() - 1.0).abs() < 1e-6);
        let l = DensityModel1D::<f32>::laplace();
        assert!((l.score(0.5).unwrap() + 2.0_f32.sqrt()).abs() < 1e-6);
    }
}
