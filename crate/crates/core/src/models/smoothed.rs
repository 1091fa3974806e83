//! Gaussian smoothing `sqrt(t0) X + sqrt(1 - t0) Z` of a registered law.

use rayon::prelude::*;

use super::univariate::DensityModel1D;
use crate::error::{Error, Result};
use crate::numerics::interp::{hermite, UniformGrid};
use crate::numerics::quadrature::{composite_legendre, gauss_legendre, partition};
use crate::scalar::{std_normal_cdf, std_normal_pdf, Real};

const GL_ORDER: usize = 12;

/// Pointwise density of `a X + b Z` for a registered law `X` and standard
/// Gaussian `Z`, by composite Gauss-Legendre over the law of `X` with panels
/// half the kernel width.
#[derive(Debug, Clone)]
pub struct GaussianBlur<T: Real> {
    base: DensityModel1D<T>,
    a: T,
    b: T,
}

impl<T: Real> GaussianBlur<T> {
    /// Channel `sqrt(t) X + sqrt(1 - t) Z`; requires `0 < t < 1`.
    pub fn new(base: DensityModel1D<T>, t: T) -> Result<Self> {
        if !(t > T::zero() && t < T::one()) {
            return Err(Error::InvalidParameter(format!("channel parameter {} not in (0,1)", t.f64())));
        }
        Ok(Self { base, a: t.sqrt(), b: (T::one() - t).sqrt() })
    }

    pub fn base(&self) -> &DensityModel1D<T> {
        &self.base
    }

    pub fn scales(&self) -> (T, T) {
        (self.a, self.b)
    }

    /// Interval outside which the density is below the floor.
    pub fn range(&self) -> (T, T) {
        let (lo, hi) = self.base.effective_range();
        let span = T::c(40.0) * self.b;
        (self.a * lo - span, self.a * hi + span)
    }

    /// Points where the density changes character: images of the base breakpoints.
    pub fn breakpoints(&self) -> Vec<T> {
        self.base.breakpoints().into_iter().map(|u| self.a * u).collect()
    }

    fn panels(&self, x: T) -> Vec<T> {
        let (lo, hi) = self.base.effective_range();
        let c = x / self.a;
        let w = self.b / self.a;
        let ulo = lo.max(c - T::c(40.0) * w);
        let uhi = hi.min(c + T::c(40.0) * w);
        if !(uhi > ulo) {
            return Vec::new();
        }
        let mut breaks = self.base.breakpoints();
        breaks.push(c);
        let coarse = partition(ulo, uhi, &breaks);
        // Half the kernel width, capped so wide kernels still resolve the base.
        let width = (w / T::c(2.0)).min(T::c(0.5));
        let mut pts = vec![coarse[0]];
        for p in coarse.windows(2) {
            let k = ((p[1] - p[0]) / width).ceil().to_usize().unwrap_or(1).max(1);
            let h = (p[1] - p[0]) / T::from_usize_lossy(k);
            for j in 1..k {
                pts.push(p[0] + h * T::from_usize_lossy(j));
            }
            pts.push(p[1]);
        }
        pts
    }

    /// `[f, f', f'']` at `x`.
    pub fn eval(&self, x: T) -> [T; 3] {
        let pts = self.panels(x);
        let mut acc = [T::zero(); 3];
        if pts.len() < 2 {
            return acc;
        }
        let (nodes, weights) = gauss_legendre(GL_ORDER);
        let b = self.b;
        for p in pts.windows(2) {
            let half = (p[1] - p[0]) / T::c(2.0);
            let mid = (p[1] + p[0]) / T::c(2.0);
            for (&xi, &wi) in nodes.iter().zip(&weights) {
                let u = mid + half * T::c(xi);
                let w = (x - self.a * u) / b;
                let k = T::c(wi) * half * self.base.pdf(u) * std_normal_pdf(w) / b;
                acc[0] += k;
                acc[1] -= k * w / b;
                acc[2] += k * (w * w - T::one()) / (b * b);
            }
        }
        acc
    }

    pub fn cdf(&self, x: T) -> T {
        let pts = self.panels(x);
        let (lo, _) = self.base.effective_range();
        if pts.len() < 2 {
            return if x > T::zero() { T::one() } else { T::zero() };
        }
        // Mass of the base entirely left of the kernel window contributes fully.
        let left = if pts[0] > lo { self.base.cdf(pts[0]) } else { T::zero() };
        let body = composite_legendre(
            |u| self.base.pdf(u) * std_normal_cdf((x - self.a * u) / self.b),
            &pts,
            GL_ORDER,
        );
        (left + body).min(T::one())
    }
}

/// Density, score and CDF of a smoothed law.
///
/// Log-density and score come from [`GaussianBlur`], tabulated once on a
/// fine grid and read back through cubic Hermite interpolation.
#[derive(Debug, Clone)]
pub struct SmoothedLaw<T: Real> {
    blur: GaussianBlur<T>,
    t0: T,
    grid: UniformGrid<T>,
    log_f: Vec<T>,
    score: Vec<T>,
    dscore: Vec<T>,
}

impl<T: Real> SmoothedLaw<T> {
    pub(crate) fn new(base: DensityModel1D<T>, t0: T) -> Result<Self> {
        let blur = GaussianBlur::new(base, t0)?;
        let (glo, ghi) = blur.range();
        let step = T::c(0.01).min(blur.b / T::c(20.0));
        let n = ((ghi - glo) / step).ceil().to_usize().unwrap_or(2).max(2) + 1;
        let grid = UniformGrid::spanning(glo, ghi, n);
        let vals: Vec<[T; 3]> = (0..n).into_par_iter().map(|i| blur.eval(grid.x(i))).collect();
        // Trim to where the density is comfortably above underflow.
        let thresh = T::density_floor().powf(T::c(5.0 / 6.0));
        let first = vals.iter().position(|v| v[0] > thresh).unwrap_or(0);
        let last = vals.iter().rposition(|v| v[0] > thresh).unwrap_or(n - 1);
        let kept = &vals[first..=last.max(first + 1)];
        let grid = UniformGrid { start: grid.x(first), step: grid.step, n: kept.len() };
        let log_f = kept.iter().map(|v| v[0].ln()).collect();
        let score = kept.iter().map(|v| v[1] / v[0]).collect();
        let dscore = kept
            .iter()
            .map(|v| {
                let s = v[1] / v[0];
                v[2] / v[0] - s * s
            })
            .collect();
        Ok(Self { blur, t0, grid, log_f, score, dscore })
    }

    pub fn base(&self) -> &DensityModel1D<T> {
        &self.blur.base
    }

    pub fn t0(&self) -> T {
        self.t0
    }

    pub fn sqrt_t0(&self) -> T {
        self.blur.a
    }

    pub fn noise_sd(&self) -> T {
        self.blur.b
    }

    /// Tabulated range.
    pub fn range(&self) -> (T, T) {
        (self.grid.start, self.grid.end())
    }

    pub(crate) fn direct(&self, x: T) -> [T; 3] {
        self.blur.eval(x)
    }

    fn lookup(&self, x: T) -> Option<(T, T, T)> {
        let (i, u) = self.grid.locate(x)?;
        let h = self.grid.step;
        let (lf, _) = hermite(u, h, self.log_f[i], self.log_f[i + 1], self.score[i], self.score[i + 1]);
        let (s, ds) = hermite(u, h, self.score[i], self.score[i + 1], self.dscore[i], self.dscore[i + 1]);
        Some((lf, s, ds))
    }

    pub fn log_pdf(&self, x: T) -> T {
        match self.lookup(x) {
            Some((lf, _, _)) => lf,
            None => self.direct(x)[0].ln(),
        }
    }

    pub fn pdf(&self, x: T) -> T {
        match self.lookup(x) {
            Some((lf, _, _)) => lf.exp(),
            None => self.direct(x)[0],
        }
    }

    pub fn score(&self, x: T) -> T {
        match self.lookup(x) {
            Some((_, s, _)) => s,
            None => {
                let v = self.direct(x);
                v[1] / v[0]
            }
        }
    }

    pub fn score_derivative(&self, x: T) -> T {
        match self.lookup(x) {
            Some((_, _, ds)) => ds,
            None => {
                let v = self.direct(x);
                let s = v[1] / v[0];
                v[2] / v[0] - s * s
            }
        }
    }

    pub fn pdf_derivative(&self, x: T) -> T {
        match self.lookup(x) {
            Some((lf, s, _)) => lf.exp() * s,
            None => self.direct(x)[1],
        }
    }

    pub fn cdf(&self, x: T) -> T {
        self.blur.cdf(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothed_gaussian_stays_gaussian() {
        let g = DensityModel1D::<f64>::gaussian();
        let s = DensityModel1D::smoothed(&g, 0.6).unwrap();
        for x in [-3.0, -0.5, 0.0, 1.1, 4.0] {
            assert!((s.pdf(x) - std_normal_pdf(x)).abs() < 1e-12);
            assert!((s.score(x).unwrap() + x).abs() < 1e-8);
            assert!((s.cdf(x) - std_normal_cdf(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn smoothed_uniform_matches_closed_form() {
        // density of aU + bZ is (Phi((x+a r)/b) - Phi((x-a r)/b)) / (2 a r)
        let u = DensityModel1D::<f64>::uniform();
        let t0 = 0.5;
        let s = DensityModel1D::smoothed(&u, t0).unwrap();
        let (a, b, r) = (t0.sqrt(), (1.0 - t0).sqrt(), 3.0_f64.sqrt());
        for x in [-3.0, -1.0, 0.0, 0.3, 2.2] {
            let exact = (std_normal_cdf((x + a * r) / b) - std_normal_cdf((x - a * r) / b)) / (2.0 * a * r);
            assert!((s.pdf(x) - exact).abs() < 1e-10 * exact.max(1e-3), "x={x}");
        }
    }

    #[test]
    fn smoothed_exponential_score_matches_emg() {
        // aX + bZ, X = E - 1: exponentially modified Gaussian with rate 1/a
        let e = DensityModel1D::<f64>::exp_centered();
        let t0 = 0.9;
        let s = DensityModel1D::smoothed(&e, t0).unwrap();
        let (a, b) = (t0.sqrt(), (1.0 - t0).sqrt());
        let lam = 1.0 / a;
        let logf = |x: f64| {
            let y = x + a; // shift to an uncentred exponential
            let z = (lam * b * b - y) / b;
            (lam).ln() + lam * (lam * b * b / 2.0 - y) + std_normal_cdf(-z).ln()
        };
        for x in [-1.5, -0.5, 0.0, 1.0, 3.0] {
            assert!((s.log_pdf(x) - logf(x)).abs() < 1e-9, "x={x}");
            let h = 1e-5;
            let fd = (logf(x + h) - logf(x - h)) / (2.0 * h);
            assert!((s.score(x).unwrap() - fd).abs() < 1e-6, "x={x}");
        }
    }

    #[test]
    fn nested_smoothing_collapses() {
        let e = DensityModel1D::<f64>::exp_centered();
        let s1 = DensityModel1D::smoothed(&e, 0.9).unwrap();
        let s2 = DensityModel1D::smoothed(&s1, 0.5).unwrap();
        let direct = DensityModel1D::smoothed(&e, 0.45).unwrap();
        assert!((s2.pdf(0.2) - direct.pdf(0.2)).abs() < 1e-14);
        assert_eq!(s2.name(), direct.name());
    }
}
