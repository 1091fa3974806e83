//! Densities tabulated on uniform grids and the convolution that produces them.

use serde::{Deserialize, Serialize};

use super::density::Density1D;
use super::interp::{hermite, UniformGrid};
use crate::error::{Error, Result};
use crate::models::Support;
use crate::scalar::Real;

/// Output grid layout: `points` nodes spanning `mean +- sigma_span * sd`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec<T> {
    pub points: usize,
    pub sigma_span: T,
}

impl<T: Real> Default for GridSpec<T> {
    fn default() -> Self {
        Self { points: 4096, sigma_span: T::c(12.0) }
    }
}

/// Largest tolerated mass outside the output grid.
pub const MAX_LOST_MASS: f64 = 1e-6;

/// Density on a uniform grid with nodal values and slopes, interpolated by
/// cubic Hermite pieces. Values are normalized so the interpolant has unit
/// mass; the plain trapezoid sum of the nodes then differs from one by
/// `h^2 (f'(lo) - f'(hi)) / 12`.
#[derive(Debug, Clone)]
pub struct GridDensity<T: Real> {
    grid: UniformGrid<T>,
    values: Vec<T>,
    slopes: Vec<T>,
    support: Support<T>,
    mean: T,
    variance: T,
    lost_mass: T,
    cumulative: Vec<T>,
}

fn trapezoid<T: Real>(v: &[T], h: T) -> T {
    if v.len() < 2 {
        return T::zero();
    }
    let inner: T = v[1..v.len() - 1].iter().copied().sum();
    (inner + (v[0] + v[v.len() - 1]) / T::c(2.0)) * h
}

impl<T: Real> GridDensity<T> {
    /// Builds from nodal values and slopes. `mean` and `variance` are the
    /// nominal moments of the law; `raw_mass` is the integral of the
    /// unnormalized values, used to report lost mass.
    pub fn from_nodes(
        grid: UniformGrid<T>,
        mut values: Vec<T>,
        mut slopes: Vec<T>,
        support: Support<T>,
        mean: T,
        variance: T,
    ) -> Result<Self> {
        if values.len() != grid.n || slopes.len() != grid.n {
            return Err(Error::InvalidParameter("grid and value lengths differ".into()));
        }
        let h = grid.step;
        // Hermite-corrected trapezoid: exact for the cubic interpolant.
        let raw = trapezoid(&values, h) + h * h / T::c(12.0) * (slopes[0] - slopes[grid.n - 1]);
        let lost_mass = (T::one() - raw).max(T::zero());
        let mass = raw;
        if !(mass > T::zero()) || !mass.is_finite() {
            return Err(Error::numeric("grid density", "non-positive or non-finite mass"));
        }
        for v in values.iter_mut() {
            *v = (*v / mass).max(T::zero());
        }
        for s in slopes.iter_mut() {
            *s /= mass;
        }
        let mut cumulative = Vec::with_capacity(grid.n);
        let mut acc = T::zero();
        cumulative.push(acc);
        for i in 1..grid.n {
            acc += (values[i - 1] + values[i]) * h / T::c(2.0)
                + h * h / T::c(12.0) * (slopes[i - 1] - slopes[i]);
            cumulative.push(acc);
        }
        Ok(Self { grid, values, slopes, support, mean, variance, lost_mass, cumulative })
    }

    /// Tabulates an analytic density with its derivative.
    pub fn tabulate(d: &dyn Density1D<T>, grid: UniformGrid<T>) -> Result<Self> {
        let s = d.support();
        let xs: Vec<T> = grid.points().into_iter().map(|x| inward(x, &s, grid.step)).collect();
        let values = xs.iter().map(|&x| d.pdf(x)).collect();
        let slopes = xs.iter().map(|&x| d.pdf_derivative(x)).collect();
        Self::from_nodes(grid, values, slopes, d.support(), d.mean(), d.variance())
    }

    pub fn grid(&self) -> &UniformGrid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn slopes(&self) -> &[T] {
        &self.slopes
    }

    pub fn nodes(&self) -> Vec<T> {
        self.grid.points()
    }

    /// Mass missing from the grid before normalization.
    pub fn lost_mass(&self) -> T {
        self.lost_mass
    }

    /// Trapezoid integral of the nodal values.
    pub fn trapezoid_mass(&self) -> T {
        trapezoid(&self.values, self.grid.step)
    }

    /// `(mean, variance)` of the tabulated values by the trapezoid rule.
    pub fn grid_moments(&self) -> (T, T) {
        let h = self.grid.step;
        let xs = self.grid.points();
        let m1: Vec<T> = xs.iter().zip(&self.values).map(|(x, v)| *x * *v).collect();
        let mean = trapezoid(&m1, h);
        let m2: Vec<T> = xs
            .iter()
            .zip(&self.values)
            .map(|(x, v)| (*x - mean) * (*x - mean) * *v)
            .collect();
        (mean, trapezoid(&m2, h))
    }

    fn interp(&self, x: T) -> Option<(T, T)> {
        let (i, u) = self.grid.locate(x)?;
        Some(hermite(
            u,
            self.grid.step,
            self.values[i],
            self.values[i + 1],
            self.slopes[i],
            self.slopes[i + 1],
        ))
    }

    /// `f'/f` where the interpolated density is above the positivity floor.
    pub fn score(&self, x: T) -> Option<T> {
        let (v, d) = self.interp(x)?;
        if v > T::density_floor() {
            Some(d / v)
        } else {
            None
        }
    }

    pub fn cdf(&self, x: T) -> T {
        match self.grid.locate(x) {
            None => {
                if x < self.grid.start {
                    T::zero()
                } else {
                    T::one()
                }
            }
            Some((i, u)) => {
                let c0 = self.cumulative[i];
                let c1 = self.cumulative[i + 1];
                (c0 + (c1 - c0) * u).min(T::one()).max(T::zero())
            }
        }
    }

    /// Inverse of the piecewise linear CDF.
    pub fn quantile(&self, p: T) -> T {
        let total = *self.cumulative.last().expect("non-empty grid");
        let target = p * total;
        let i = self.cumulative.partition_point(|&c| c < target);
        if i == 0 {
            return self.grid.start;
        }
        if i >= self.grid.n {
            return self.grid.end();
        }
        let (c0, c1) = (self.cumulative[i - 1], self.cumulative[i]);
        let u = if c1 > c0 { (target - c0) / (c1 - c0) } else { T::zero() };
        self.grid.x(i - 1) + self.grid.step * u
    }

    /// Every other node: the same density on a grid twice as coarse, used
    /// for refinement error estimates.
    pub fn coarsened(&self) -> Self {
        let idx: Vec<usize> = (0..self.grid.n).step_by(2).collect();
        let grid = UniformGrid { start: self.grid.start, step: self.grid.step * T::c(2.0), n: idx.len() };
        let mut out = self.clone();
        out.grid = grid;
        out.values = idx.iter().map(|&i| self.values[i]).collect();
        out.slopes = idx.iter().map(|&i| self.slopes[i]).collect();
        out.cumulative = idx.iter().map(|&i| self.cumulative[i]).collect();
        out
    }
}

impl<T: Real> Density1D<T> for GridDensity<T> {
    fn pdf(&self, x: T) -> T {
        if !self.support.contains_interior(x) {
            return T::zero();
        }
        self.interp(x).map(|(v, _)| v.max(T::zero())).unwrap_or(T::zero())
    }

    fn pdf_derivative(&self, x: T) -> T {
        if !self.support.contains_interior(x) {
            return T::zero();
        }
        self.interp(x).map(|(_, d)| d).unwrap_or(T::zero())
    }

    fn support(&self) -> Support<T> {
        self.support
    }

    fn breakpoints(&self) -> Vec<T> {
        self.support.finite_endpoints()
    }

    fn mean(&self) -> T {
        self.mean
    }

    fn variance(&self) -> T {
        self.variance
    }

    fn effective_range(&self) -> (T, T) {
        (self.support.lo().max(self.grid.start), self.support.hi().min(self.grid.end()))
    }

    fn cells(&self) -> Vec<T> {
        let (lo, hi) = self.effective_range();
        let mut pts: Vec<T> = self.grid.points().into_iter().filter(|&x| x > lo && x < hi).collect();
        pts.push(lo);
        pts.push(hi);
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        pts
    }
}

const GL3_X: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
const GL3_W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

/// Density of `a X + b Y` for independent `X ~ f`, `Y ~ g`, tabulated on a
/// grid of `spec.points` nodes spanning `spec.sigma_span` standard deviations.
///
/// Each nodal value `h(w) = |b|^{-1} int f(x) g((w - a x) / b) dx` is a
/// composite three-point Gauss-Legendre sum over the cells of `f`, split at
/// the preimages of the breakpoints of `g`. Slopes come from the same sum
/// with `g'`, plus the contributions of the jumps of `g`.
pub fn convolve_densities<T: Real>(
    f: &dyn Density1D<T>,
    g: &dyn Density1D<T>,
    a: T,
    b: T,
    spec: &GridSpec<T>,
) -> Result<GridDensity<T>> {
    if a == T::zero() || b == T::zero() || !a.is_finite() || !b.is_finite() {
        return Err(Error::InvalidParameter("convolution scales must be nonzero".into()));
    }
    if spec.points < 16 {
        return Err(Error::InvalidParameter("grid needs at least 16 points".into()));
    }
    let mean = a * f.mean() + b * g.mean();
    let variance = a * a * f.variance() + b * b * g.variance();
    let sd = variance.sqrt();
    let support = minkowski(f.support(), g.support(), a, b);
    let lo = support.lo().max(mean - spec.sigma_span * sd);
    let hi = support.hi().min(mean + spec.sigma_span * sd);
    let grid = UniformGrid::spanning(lo, hi, spec.points);

    let cells = f.cells();
    let (glo, ghi) = g.effective_range();
    let gbreaks = g.breakpoints();
    let gjumps = g.jumps();
    let gl: Vec<(T, T)> = GL3_X.iter().zip(&GL3_W).map(|(&x, &w)| (T::c(x), T::c(w))).collect();
    let inv_b = T::one() / b;
    let inv_abs_b = T::one() / b.abs();

    let mut values = Vec::with_capacity(grid.n);
    let mut slopes = Vec::with_capacity(grid.n);
    let mut pieces: Vec<T> = Vec::new();
    for i in 0..grid.n {
        let w = inward(grid.x(i), &support, grid.step);
        let x1 = (w - b * glo) / a;
        let x2 = (w - b * ghi) / a;
        let (xl, xr) = if x1 < x2 { (x1, x2) } else { (x2, x1) };
        let start = cells.partition_point(|&c| c <= xl);
        let end = cells.partition_point(|&c| c < xr);
        pieces.clear();
        pieces.push(xl.max(cells[0]));
        pieces.extend_from_slice(&cells[start..end]);
        pieces.push(xr.min(cells[cells.len() - 1]));
        for &c in &gbreaks {
            let x = (w - b * c) / a;
            if x > pieces[0] && x < pieces[pieces.len() - 1] {
                pieces.push(x);
            }
        }
        if pieces.len() > cells[start..end].len() + 2 {
            pieces.sort_by(|p, q| p.partial_cmp(q).unwrap());
        }
        let mut v = T::zero();
        let mut dv = T::zero();
        for p in pieces.windows(2) {
            if !(p[1] > p[0]) {
                continue;
            }
            let half = (p[1] - p[0]) / T::c(2.0);
            let mid = (p[1] + p[0]) / T::c(2.0);
            for &(gx, gw) in &gl {
                let x = mid + half * gx;
                let fx = f.pdf(x);
                if fx == T::zero() {
                    continue;
                }
                let y = (w - a * x) * inv_b;
                let k = gw * half * fx;
                v += k * g.pdf(y);
                dv += k * g.pdf_derivative(y);
            }
        }
        let mut slope = dv * inv_b * inv_abs_b;
        for &(c, jump) in &gjumps {
            let x = (w - b * c) / a;
            slope += jump * f.pdf(x) / (b * a.abs());
        }
        values.push(v * inv_abs_b);
        slopes.push(slope);
    }
    let out = GridDensity::from_nodes(grid, values, slopes, support, mean, variance)?;
    if out.lost_mass > T::c(MAX_LOST_MASS) {
        return Err(Error::Coverage { lost_mass: out.lost_mass.f64() });
    }
    Ok(out)
}

/// Nodes on a finite support endpoint are evaluated just inside it, so
/// values and slopes are the one-sided limits.
fn inward<T: Real>(x: T, s: &Support<T>, h: T) -> T {
    let eps = h * T::c(1e-9);
    if x <= s.lo() {
        s.lo() + eps
    } else if x >= s.hi() {
        s.hi() - eps
    } else {
        x
    }
}

fn minkowski<T: Real>(s: Support<T>, r: Support<T>, a: T, b: T) -> Support<T> {
    let sa = s.affine(a, T::zero());
    let rb = r.affine(b, T::zero());
    let lo = sa.lo() + rb.lo();
    let hi = sa.hi() + rb.hi();
    Support::new(lo, hi).unwrap_or_else(|_| Support::full_line())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::DensityModel1D;
    use crate::scalar::std_normal_pdf;

    #[test]
    fn gaussian_stability() {
        let g = DensityModel1D::<f64>::gaussian();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let h = convolve_densities(&g, &g, s, s, &GridSpec::default()).unwrap();
        let err = h
            .nodes()
            .iter()
            .zip(h.values())
            .map(|(&x, &v)| (v - std_normal_pdf(x)).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
        assert!((h.trapezoid_mass() - 1.0).abs() < 1e-10);
        for x in [-2.0, 0.3, 1.7] {
            assert!((h.score(x).unwrap() + x).abs() < 1e-6);
        }
    }

    #[test]
    fn uniform_triangle() {
        let u = DensityModel1D::<f64>::uniform();
        // an odd node count puts the apex on a node
        let spec = GridSpec { points: 4097, ..GridSpec::default() };
        let h = convolve_densities(&u, &u, 1.0, 1.0, &spec).unwrap();
        let r = 2.0 * 3.0_f64.sqrt();
        let tri = |x: f64| ((r - x.abs()) / (r * r)).max(0.0);
        assert!((h.pdf(0.0) - 1.0 / r).abs() < 1e-6);
        for x in h.nodes().into_iter().step_by(97) {
            assert!((h.pdf(x) - tri(x)).abs() < 1e-6, "x={x}");
        }
        assert!((h.pdf_derivative(1.0) + 1.0 / (r * r)).abs() < 1e-6);
    }

    #[test]
    fn exponential_pair_matches_gamma() {
        // (X1 + X2)/sqrt(2) with Xi = Ei - 1: density of (G - 2)/sqrt(2), G ~ Gamma(2)
        let e = DensityModel1D::<f64>::exp_centered();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let h = convolve_densities(&e, &e, s, s, &GridSpec::default()).unwrap();
        let exact = |w: f64| {
            let g = std::f64::consts::SQRT_2 * w + 2.0;
            if g <= 0.0 { 0.0 } else { std::f64::consts::SQRT_2 * g * (-g).exp() }
        };
        for w in [-1.3, -0.5, 0.0, 1.0, 3.0, 6.0] {
            assert!((h.pdf(w) - exact(w)).abs() < 1e-7, "w={w}: {} vs {}", h.pdf(w), exact(w));
        }
    }

    #[test]
    fn coverage_error_on_narrow_grid() {
        let e = DensityModel1D::<f64>::exp_centered();
        let spec = GridSpec { points: 512, sigma_span: 4.0 };
        assert!(matches!(
            convolve_densities(&e, &e, 1.0, 1.0, &spec),
            Err(Error::Coverage { .. })
        ));
    }

    #[test]
    fn quantiles_invert_cdf() {
        let g = DensityModel1D::<f64>::gaussian();
        let h = GridDensity::tabulate(&g, UniformGrid::spanning(-12.0, 12.0, 4096)).unwrap();
        assert!(h.quantile(0.5).abs() < 1e-9);
        assert!((h.quantile(0.975) - 1.959_963_984_540_054).abs() < 1e-4);
        assert!((h.cdf(h.quantile(0.2)) - 0.2).abs() < 1e-9);
    }
}
