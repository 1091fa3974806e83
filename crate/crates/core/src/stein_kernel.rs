//! Stein kernels of univariate laws and Stein matrices of the supported
//! multivariate laws.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::models::suite::{expectation_on, BumpPolynomial};
use crate::models::{DensityModel1D, GaussianModel, Model, MultiModel, ProductModel};
use crate::numerics::interp::{hermite, UniformGrid};
use crate::numerics::quadrature::{gauss_kronrod, QuadratureSpec};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    ClosedForm,
    Quadrature,
}

/// Tabulated `tau` with slopes `tau' = -x - tau * rho`, read back by cubic
/// Hermite interpolation.
#[derive(Debug, Clone)]
struct KernelCache<T> {
    grid: UniformGrid<T>,
    tau: Vec<T>,
    slope: Vec<T>,
}

/// Canonical Stein kernel `tau(x) = f(x)^{-1} int_x^inf y f(y) dy` of a
/// centered univariate law.
#[derive(Debug, Clone)]
pub struct SteinKernel1D<T: Real> {
    model: DensityModel1D<T>,
    provenance: Provenance,
    cache: Option<KernelCache<T>>,
    offset: T,
    spec: QuadratureSpec<T>,
}

fn kernel_spec<T: Real>() -> QuadratureSpec<T> {
    QuadratureSpec::default()
        .with_abs_tol(T::c(1e-12).max(T::epsilon() * T::c(10.0)))
}

/// Cache resolution.
const CACHE_STEP: f64 = 0.01;

impl<T: Real> SteinKernel1D<T> {
    /// Closed form when the family has one, quadrature otherwise.
    pub fn new(model: &DensityModel1D<T>) -> Result<Self> {
        if model.has_closed_form_kernel() {
            Ok(Self {
                model: model.clone(),
                provenance: Provenance::ClosedForm,
                cache: None,
                offset: T::zero(),
                spec: kernel_spec(),
            })
        } else {
            Self::by_quadrature(model)
        }
    }

    /// Quadrature kernel regardless of closed-form availability.
    pub fn by_quadrature(model: &DensityModel1D<T>) -> Result<Self> {
        let mut k = Self {
            model: model.clone(),
            provenance: Provenance::Quadrature,
            cache: None,
            offset: T::zero(),
            spec: kernel_spec(),
        };
        let interior_breaks = model
            .breakpoints()
            .into_iter()
            .any(|b| model.support().contains_interior(b));
        if !interior_breaks {
            k.cache = Some(k.build_cache()?);
        }
        Ok(k)
    }

    /// `tau + delta`: a kernel that violates the Stein identity, used as a
    /// negative control.
    pub fn perturbed(&self, delta: T) -> Self {
        let mut k = self.clone();
        k.offset += delta;
        k
    }

    pub fn model(&self) -> &DensityModel1D<T> {
        &self.model
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    fn build_cache(&self) -> Result<KernelCache<T>> {
        let m = &self.model;
        let s = m.support();
        let (elo, ehi) = m.effective_range();
        let thresh = T::density_floor().powf(T::c(0.8));
        let pad = T::c(1e-6);
        let mut lo = if s.lo().is_finite() { s.lo() + pad } else { elo };
        let mut hi = if s.hi().is_finite() { s.hi() - pad } else { ehi };
        // Trim tails where the density is too small to divide by.
        let probe = UniformGrid::spanning(lo, hi, 4001);
        let pts = probe.points();
        if let Some(i) = pts.iter().position(|&x| m.pdf(x) > thresh) {
            lo = pts[i];
        }
        if let Some(i) = pts.iter().rposition(|&x| m.pdf(x) > thresh) {
            hi = pts[i];
        }
        let n = (((hi - lo) / T::c(CACHE_STEP)).ceil().to_usize().unwrap_or(2)).max(2) + 1;
        let grid = UniformGrid::spanning(lo, hi, n);
        let xs = grid.points();
        // int over each cell of y f(y)
        let cell: Vec<T> = xs
            .windows(2)
            .map(|w| {
                crate::numerics::quadrature::composite_legendre(
                    |y| y * m.pdf(y),
                    &[w[0], w[1]],
                    12,
                )
            })
            .collect();
        let head = self.tail_integral(lo)?; // int_lo^inf, used for the left accumulation
        let tail = self.tail_integral(hi)?;
        let mut upper = vec![T::zero(); n];
        // right of the median accumulate from the right, left of it from the left
        upper[n - 1] = tail;
        for i in (0..n - 1).rev() {
            upper[i] = upper[i + 1] + cell[i];
        }
        let mut lower = vec![T::zero(); n];
        lower[0] = head;
        for i in 1..n {
            lower[i] = lower[i - 1] - cell[i - 1];
        }
        let mut tau = Vec::with_capacity(n);
        let mut slope = Vec::with_capacity(n);
        for (i, &x) in xs.iter().enumerate() {
            let integral = if m.cdf(x) < T::c(0.5) { lower[i] } else { upper[i] };
            let f = m.pdf(x);
            if !(f > T::density_floor()) {
                return Err(Error::BoundarySingular { x: x.f64() });
            }
            let t = integral / f;
            tau.push(t);
            slope.push(-x - t * m.score_interior(x));
        }
        Ok(KernelCache { grid, tau, slope })
    }

    /// `int_x^hi y f(y) dy` by adaptive quadrature, taken from the nearer end
    /// so that tail values keep their relative accuracy.
    fn tail_integral(&self, x: T) -> Result<T> {
        let m = &self.model;
        let (lo, hi) = m.effective_range();
        let g = |y: T| [y];
        if m.cdf(x) < T::c(0.5) {
            let left = expectation_on(m, g, lo, x, &self.spec)?;
            Ok(-left[0])
        } else {
            let right = expectation_on(m, g, x, hi, &self.spec)?;
            Ok(right[0])
        }
    }

    /// Direct quadrature evaluation, bypassing closed forms and caches.
    pub fn quadrature_at(&self, x: T) -> Result<T> {
        self.check_point(x)?;
        let f = self.model.pdf(x);
        Ok(self.tail_integral(x)? / f)
    }

    fn check_point(&self, x: T) -> Result<()> {
        if !self.model.support().contains_interior(x) {
            return Err(Error::Domain { coordinate: 0, value: x.f64() });
        }
        if !(self.model.pdf(x) > T::density_floor()) {
            return Err(Error::BoundarySingular { x: x.f64() });
        }
        Ok(())
    }

    pub fn eval(&self, x: T) -> Result<T> {
        if let Some(t) = self.model.closed_form_kernel(x).filter(|_| self.provenance == Provenance::ClosedForm) {
            if !self.model.support().contains_interior(x) {
                return Err(Error::Domain { coordinate: 0, value: x.f64() });
            }
            return Ok(t + self.offset);
        }
        self.check_point(x)?;
        if let Some(c) = &self.cache {
            if let Some((i, u)) = c.grid.locate(x) {
                let (v, _) = hermite(u, c.grid.step, c.tau[i], c.tau[i + 1], c.slope[i], c.slope[i + 1]);
                return Ok(v + self.offset);
            }
        }
        Ok(self.quadrature_at(x)? + self.offset)
    }

    /// `E[tau(X)]`, which equals the variance for a valid kernel.
    pub fn mean(&self) -> Result<T> {
        let r = self.expect(|_, t| [t])?;
        Ok(r[0])
    }

    /// `E[g(x, tau(x))]` under the model.
    pub fn expect<const K: usize>(&self, g: impl Fn(T, T) -> [T; K]) -> Result<[T; K]> {
        let (lo, hi) = self.model.effective_range();
        self.expect_on(g, lo, hi)
    }

    fn expect_on<const K: usize>(&self, g: impl Fn(T, T) -> [T; K], lo: T, hi: T) -> Result<[T; K]> {
        let m = &self.model;
        let breaks = m.breakpoints();
        let r = gauss_kronrod(
            |x| {
                let f = m.pdf(x);
                let mut v = [T::zero(); K];
                if f > T::density_floor() {
                    if let Ok(t) = self.eval(x) {
                        v = g(x, t);
                        for e in v.iter_mut() {
                            *e *= f;
                        }
                    }
                }
                v
            },
            lo,
            hi,
            &breaks,
            &self.spec,
        )?;
        Ok(r.value)
    }
}

/// Residual of the Stein identity `E[tau phi'] = E[X phi]` for one test function.
#[derive(Debug, Clone, Serialize)]
pub struct SteinResidual<T> {
    pub function: BumpPolynomial<T>,
    pub kernel_side: T,
    pub moment_side: T,
    pub residual: T,
}

/// `max |E[tau(X) phi'(X)] - E[X phi(X)]|` over the suite.
pub fn verify_stein_identity<T: Real>(
    kernel: &SteinKernel1D<T>,
    suite: &[BumpPolynomial<T>],
) -> Result<(T, Vec<SteinResidual<T>>)> {
    let mut worst = T::zero();
    let mut rows = Vec::with_capacity(suite.len());
    for phi in suite {
        let r = kernel
            .expect_on(|x, t| [t * phi.derivative(x), x * phi.value(x)], phi.lo(), phi.hi())
            .map_err(|e| Error::numeric("stein identity", format!("{:?}: {e}", phi)))?;
        let residual = (r[0] - r[1]).abs();
        if !residual.is_finite() {
            return Err(Error::numeric("stein identity", "non-finite residual"));
        }
        worst = worst.max(residual);
        rows.push(SteinResidual { function: *phi, kernel_side: r[0], moment_side: r[1], residual });
    }
    Ok((worst, rows))
}

/// `E[(1 - tau(X))^2]`.
pub fn kernel_discrepancy_1d<T: Real>(kernel: &SteinKernel1D<T>) -> Result<T> {
    let r = kernel.expect(|_, t| [(T::one() - t) * (T::one() - t)])?;
    if !r[0].is_finite() {
        return Err(Error::numeric("kernel discrepancy", "divergent integral"));
    }
    Ok(r[0])
}

/// Stein matrix of a supported multivariate law.
#[derive(Debug, Clone)]
pub enum SteinMatrix<T: Real> {
    /// `tau = C`.
    Constant(Matrix<T>),
    /// `tau(x) = A diag(tau_j(u_j)) A^T` with `u = A^{-1} x`.
    Product {
        model: ProductModel<T>,
        kernels: Vec<SteinKernel1D<T>>,
    },
}

impl<T: Real> SteinMatrix<T> {
    pub fn gaussian(model: &GaussianModel<T>) -> Self {
        SteinMatrix::Constant(model.cov().clone())
    }

    pub fn product(model: &ProductModel<T>) -> Result<Self> {
        let kernels = model
            .components()
            .iter()
            .map(SteinKernel1D::new)
            .collect::<Result<Vec<_>>>()?;
        Ok(SteinMatrix::Product { model: model.clone(), kernels })
    }

    pub fn provenance(&self) -> Provenance {
        match self {
            SteinMatrix::Constant(_) => Provenance::ClosedForm,
            SteinMatrix::Product { kernels, .. } => {
                if kernels.iter().all(|k| k.provenance() == Provenance::ClosedForm) {
                    Provenance::ClosedForm
                } else {
                    Provenance::Quadrature
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SteinMatrix::Constant(c) => c.rows(),
            SteinMatrix::Product { kernels, .. } => kernels.len(),
        }
    }

    pub fn eval(&self, x: &[T]) -> Result<Matrix<T>> {
        match self {
            SteinMatrix::Constant(c) => Ok(c.clone()),
            SteinMatrix::Product { model, kernels } => {
                let u = model.to_components(x);
                let mut diag = Vec::with_capacity(u.len());
                for (j, (k, &uj)) in kernels.iter().zip(&u).enumerate() {
                    diag.push(k.eval(uj).map_err(|e| match e {
                        Error::Domain { value, .. } => Error::Domain { coordinate: j, value },
                        other => other,
                    })?);
                }
                let d = Matrix::diagonal(&diag);
                Ok(match model.linear_map() {
                    None => d,
                    Some(a) => &(a * &d) * &a.transpose(),
                })
            }
        }
    }

    /// `tr E[(Id - tau)(Id - tau)^T]`.
    pub fn discrepancy(&self) -> Result<T> {
        match self {
            SteinMatrix::Constant(c) => {
                let m = &Matrix::identity(c.rows()) - c;
                Ok((&m * &m.transpose()).trace())
            }
            SteinMatrix::Product { model, kernels } => {
                let d = kernels.len();
                let mut m1 = Vec::with_capacity(d);
                let mut m2 = Vec::with_capacity(d);
                for k in kernels {
                    let r = k.expect(|_, t| [t, t * t])?;
                    m1.push(r[0]);
                    m2.push(r[1]);
                }
                let a = model
                    .linear_map()
                    .cloned()
                    .unwrap_or_else(|| Matrix::identity(d));
                let g = &a.transpose() * &a;
                // tr(I) - 2 tr(A E[D] A^T) + sum_jk G_jk^2 E[tau_j tau_k]
                let mut total = T::from_usize_lossy(d);
                for j in 0..d {
                    total -= T::c(2.0) * g[(j, j)] * m1[j];
                    for k in 0..d {
                        let e = if j == k { m2[j] } else { m1[j] * m1[k] };
                        total += g[(j, k)] * g[(j, k)] * e;
                    }
                }
                Ok(total)
            }
        }
    }

    /// `max ||E[tau grad phi] - E[X phi]||_inf` over tensor-product test
    /// functions `phi(x) = prod_j psi_j(u_j)`, `u = A^{-1} x`, built from the
    /// component suites. Expectations factor over the independent components.
    pub fn verify_identity(&self, suite_size: usize) -> Result<T> {
        let (product, kernels) = match self {
            SteinMatrix::Constant(c) => {
                let g = GaussianModel::new(c.clone())?;
                let l = c.cholesky()?;
                let comps = vec![DensityModel1D::gaussian(); g.dim()];
                let p = ProductModel::new(comps, Some(l))?;
                let ks = p.components().iter().map(SteinKernel1D::new).collect::<Result<Vec<_>>>()?;
                (p, ks)
            }
            SteinMatrix::Product { model, kernels } => (model.clone(), kernels.clone()),
        };
        let d = kernels.len();
        let a = product.linear_map().cloned().unwrap_or_else(|| Matrix::identity(d));
        let suites: Vec<Vec<BumpPolynomial<T>>> = kernels
            .iter()
            .map(|k| crate::models::suite::test_suite(k.model()).into_iter().take(suite_size).collect())
            .collect();
        // Per component and test function: E[psi], E[U psi], E[tau psi'].
        let mut moments = Vec::with_capacity(d);
        for (k, suite) in kernels.iter().zip(&suites) {
            let mut row = Vec::with_capacity(suite.len());
            for phi in suite {
                let r = k.expect_on(
                    |x, t| [phi.value(x), x * phi.value(x), t * phi.derivative(x)],
                    phi.lo(),
                    phi.hi(),
                )?;
                row.push(r);
            }
            moments.push(row);
        }
        let mut worst = T::zero();
        let n = suite_size;
        let mut idx = vec![0usize; d];
        loop {
            // E[tau_U grad psi]_j and E[U psi]_j
            let mut lhs_u = vec![T::zero(); d];
            let mut rhs_u = vec![T::zero(); d];
            for j in 0..d {
                let mut l = moments[j][idx[j]][2];
                let mut r = moments[j][idx[j]][1];
                for k in 0..d {
                    if k != j {
                        l *= moments[k][idx[k]][0];
                        r *= moments[k][idx[k]][0];
                    }
                }
                lhs_u[j] = l;
                rhs_u[j] = r;
            }
            // X = A U: E[tau grad phi] = A E[tau_U grad psi], E[X phi] = A E[U psi]
            let lhs = a.mul_vec(&lhs_u);
            let rhs = a.mul_vec(&rhs_u);
            for j in 0..d {
                worst = worst.max((lhs[j] - rhs[j]).abs());
            }
            let mut j = 0;
            while j < d {
                idx[j] += 1;
                if idx[j] < n.min(moments[j].len()) {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
            if j == d {
                break;
            }
        }
        Ok(worst)
    }
}

/// Stein kernel or matrix of any supported law.
pub fn stein_matrix<T: Real>(model: &MultiModel<T>) -> Result<SteinMatrix<T>> {
    match model {
        MultiModel::Gaussian(g) => Ok(SteinMatrix::gaussian(g)),
        MultiModel::Product(p) => SteinMatrix::product(p),
        MultiModel::Univariate(m) => {
            SteinMatrix::product(&ProductModel::new(vec![m.clone()], None)?)
        }
    }
}

/// `E[tau(X)]` and the smallest value of `tau` on an interior grid.
pub fn kernel_mean_and_positivity<T: Real>(kernel: &SteinKernel1D<T>, points: usize) -> Result<(T, T)> {
    let mean = kernel.mean()?;
    let m = kernel.model();
    let (lo, hi) = m.effective_range();
    let (lo, hi) = (lo.max(T::c(-8.0)), hi.min(T::c(8.0)));
    let mut min_tau = T::infinity();
    for i in 1..=points {
        let x = lo + (hi - lo) * T::from_usize_lossy(i) / T::from_usize_lossy(points + 1);
        if m.pdf(x) > T::density_floor() {
            min_tau = min_tau.min(kernel.eval(x)?);
        }
    }
    Ok((mean, min_tau))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::register_standard_models;
    use crate::scalar::{std_normal_pdf, std_normal_sf};

    #[test]
    fn closed_forms() {
        let u = SteinKernel1D::new(&DensityModel1D::<f64>::uniform()).unwrap();
        assert_eq!(u.provenance(), Provenance::ClosedForm);
        assert!((u.eval(0.0).unwrap() - 1.5).abs() < 1e-15);
        let e = SteinKernel1D::new(&DensityModel1D::<f64>::exp_centered()).unwrap();
        assert_eq!(e.eval(0.0).unwrap(), 1.0);
        assert!(e.eval(-1.5).is_err());
    }

    #[test]
    fn quadrature_matches_closed_forms() {
        for m in register_standard_models::<f64>() {
            if !m.has_closed_form_kernel() {
                continue;
            }
            let k = SteinKernel1D::new(&m).unwrap();
            let (lo, hi) = (m.support().lo().max(-6.0), m.support().hi().min(6.0));
            for i in 1..=200 {
                let x = lo + (hi - lo) * i as f64 / 201.0;
                let d = (k.eval(x).unwrap() - k.quadrature_at(x).unwrap()).abs();
                assert!(d < 1e-7, "{} at {x}: {d}", m.name());
            }
        }
    }

    #[test]
    fn mixture_kernel_matches_gaussian_tail_formula() {
        let mu = 0.8;
        let s: f64 = 0.6;
        let m = DensityModel1D::gauss_mixture(mu).unwrap();
        let k = SteinKernel1D::new(&m).unwrap();
        assert_eq!(k.provenance(), Provenance::Quadrature);
        // int_x^inf y N(y; c, s^2) dy = c Phi_bar((x-c)/s) + s N((x-c)/s)
        let part = |x: f64, c: f64| c * std_normal_sf((x - c) / s) + s * std_normal_pdf((x - c) / s);
        for x in [-4.0, -1.3, -0.2, 0.0, 0.55, 2.0, 4.5] {
            let exact = 0.5 * (part(x, mu) + part(x, -mu)) / m.pdf(x);
            assert!((k.eval(x).unwrap() - exact).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn perturbed_kernel_breaks_identity() {
        // Under the uniform law E[phi'] = 0 for every interior test function,
        // so the shift is invisible there; the exponential exposes it.
        let m = DensityModel1D::<f64>::exp_centered();
        let k = SteinKernel1D::new(&m).unwrap();
        let suite = crate::models::suite::test_suite(&m);
        let (good, _) = verify_stein_identity(&k, &suite).unwrap();
        let (bad, rows) = verify_stein_identity(&k.perturbed(0.1), &suite).unwrap();
        assert!(good < 1e-8 && bad > 1e-3);
        for r in rows {
            let dphi = crate::models::suite::expectation(&m, |x| [r.function.derivative(x)], &QuadratureSpec::default()).unwrap()[0];
            assert!((r.residual - 0.1 * dphi.abs()).abs() < 1e-9);
        }
    }

    #[test]
    fn product_of_exponentials_at_origin() {
        let e = DensityModel1D::<f64>::exp_centered();
        let p = ProductModel::iid(e, 2).unwrap();
        let s = SteinMatrix::product(&p).unwrap();
        let t = s.eval(&[0.0, 0.0]).unwrap();
        assert_eq!(t.to_nested(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!((s.discrepancy().unwrap() - 2.0).abs() < 1e-9);
    }
}
