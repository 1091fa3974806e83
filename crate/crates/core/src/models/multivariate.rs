use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::univariate::DensityModel1D;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

/// Common interface of the laws that representation and functional
/// estimators can consume.
pub trait Model<T: Real>: Sync {
    fn dim(&self) -> usize;

    fn name(&self) -> String;

    /// `grad log f(x)` on the interior of the support.
    fn score_at(&self, x: &[T]) -> Result<Vec<T>>;

    fn log_pdf_at(&self, x: &[T]) -> T;

    fn covariance(&self) -> Matrix<T>;

    /// Draws one point into `out` (length [`Model::dim`]).
    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [T]);

    fn is_gaussian(&self) -> bool;

    /// Whether the score identity holds against every smooth compactly
    /// supported test function on the whole space.
    fn regular_score(&self) -> bool;
}

impl<T: Real> Model<T> for DensityModel1D<T> {
    fn dim(&self) -> usize {
        1
    }

    fn name(&self) -> String {
        DensityModel1D::name(self).to_string()
    }

    fn score_at(&self, x: &[T]) -> Result<Vec<T>> {
        Ok(vec![self.score(x[0])?])
    }

    fn log_pdf_at(&self, x: &[T]) -> T {
        self.log_pdf(x[0])
    }

    fn covariance(&self) -> Matrix<T> {
        Matrix::scalar(self.variance())
    }

    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [T]) {
        out[0] = self.sample(rng);
    }

    fn is_gaussian(&self) -> bool {
        DensityModel1D::is_gaussian(self)
    }

    fn regular_score(&self) -> bool {
        DensityModel1D::regular_score(self)
    }
}

/// Centered Gaussian with covariance `C`.
#[derive(Debug, Clone)]
pub struct GaussianModel<T: Real> {
    cov: Matrix<T>,
    chol: Matrix<T>,
    precision: Matrix<T>,
    log_norm: T,
}

impl<T: Real> GaussianModel<T> {
    pub fn new(cov: Matrix<T>) -> Result<Self> {
        if !cov.is_square() {
            return Err(Error::LinearAlgebra("covariance must be square".into()));
        }
        let cov = cov.symmetrized();
        let chol = cov.cholesky()?;
        let precision = cov.inverse()?.symmetrized();
        let d = T::from_usize_lossy(cov.rows());
        let log_det = (0..cov.rows())
            .map(|i| chol[(i, i)].ln())
            .sum::<T>()
            * T::c(2.0);
        let log_norm = -(d * (T::c(2.0) * T::PI()).ln() + log_det) / T::c(2.0);
        Ok(Self { cov, chol, precision, log_norm })
    }

    pub fn standard(d: usize) -> Self {
        Self::new(Matrix::identity(d)).expect("identity is positive definite")
    }

    pub fn cov(&self) -> &Matrix<T> {
        &self.cov
    }

    pub fn precision(&self) -> &Matrix<T> {
        &self.precision
    }
}

impl<T: Real> Model<T> for GaussianModel<T> {
    fn dim(&self) -> usize {
        self.cov.rows()
    }

    fn name(&self) -> String {
        format!("gaussian{}", self.dim())
    }

    fn score_at(&self, x: &[T]) -> Result<Vec<T>> {
        if let Some(j) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Domain { coordinate: j, value: x[j].f64() });
        }
        Ok(self.precision.mul_vec(x).into_iter().map(|v| -v).collect())
    }

    fn log_pdf_at(&self, x: &[T]) -> T {
        let px = self.precision.mul_vec(x);
        let q: T = x.iter().zip(&px).map(|(a, b)| *a * *b).sum();
        self.log_norm - q / T::c(2.0)
    }

    fn covariance(&self) -> Matrix<T> {
        self.cov.clone()
    }

    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [T]) {
        let d = self.dim();
        let z: Vec<T> = (0..d)
            .map(|_| T::c(StandardNormal.sample(rng)))
            .collect();
        let y = self.chol.mul_vec(&z);
        out[..d].copy_from_slice(&y);
    }

    fn is_gaussian(&self) -> bool {
        true
    }

    fn regular_score(&self) -> bool {
        true
    }
}

/// Independent components `U_j`, optionally pushed through an invertible
/// linear map: `X = A U`.
#[derive(Debug, Clone)]
pub struct ProductModel<T: Real> {
    components: Vec<DensityModel1D<T>>,
    map: Option<Matrix<T>>,
    inverse: Option<Matrix<T>>,
    log_abs_det: T,
    cov: Matrix<T>,
}

impl<T: Real> ProductModel<T> {
    pub fn new(components: Vec<DensityModel1D<T>>, map: Option<Matrix<T>>) -> Result<Self> {
        let d = components.len();
        if d == 0 {
            return Err(Error::InvalidParameter("product model needs components".into()));
        }
        let vars: Vec<T> = components.iter().map(|c| c.variance()).collect();
        let diag = Matrix::diagonal(&vars);
        let (inverse, log_abs_det, cov) = match &map {
            None => (None, T::zero(), diag),
            Some(a) => {
                if a.rows() != d || a.cols() != d {
                    return Err(Error::LinearAlgebra(format!(
                        "linear map must be {d}x{d}"
                    )));
                }
                let det = a.determinant()?;
                if det == T::zero() || !det.is_finite() {
                    return Err(Error::LinearAlgebra("linear map is singular".into()));
                }
                let inv = a.inverse()?;
                let cov = (&(a * &diag) * &a.transpose()).symmetrized();
                (Some(inv), det.abs().ln(), cov)
            }
        };
        Ok(Self { components, map, inverse, log_abs_det, cov })
    }

    pub fn iid(component: DensityModel1D<T>, d: usize) -> Result<Self> {
        Self::new(vec![component; d], None)
    }

    pub fn components(&self) -> &[DensityModel1D<T>] {
        &self.components
    }

    pub fn linear_map(&self) -> Option<&Matrix<T>> {
        self.map.as_ref()
    }

    /// `A^{-1} x`, the point in component coordinates.
    pub fn to_components(&self, x: &[T]) -> Vec<T> {
        match &self.inverse {
            None => x.to_vec(),
            Some(inv) => inv.mul_vec(x),
        }
    }

    pub fn from_components(&self, u: &[T]) -> Vec<T> {
        match &self.map {
            None => u.to_vec(),
            Some(a) => a.mul_vec(u),
        }
    }
}

impl<T: Real> Model<T> for ProductModel<T> {
    fn dim(&self) -> usize {
        self.components.len()
    }

    fn name(&self) -> String {
        let parts: Vec<&str> = self.components.iter().map(|c| c.name()).collect();
        let mut s = format!("product({})", parts.join(","));
        if self.map.is_some() {
            s.push_str("+map");
        }
        s
    }

    fn score_at(&self, x: &[T]) -> Result<Vec<T>> {
        let u = self.to_components(x);
        let mut r = Vec::with_capacity(u.len());
        for (j, (c, &uj)) in self.components.iter().zip(&u).enumerate() {
            r.push(c.score(uj).map_err(|_| Error::Domain {
                coordinate: j,
                value: uj.f64(),
            })?);
        }
        Ok(match &self.inverse {
            None => r,
            Some(inv) => inv.transpose().mul_vec(&r),
        })
    }

    fn log_pdf_at(&self, x: &[T]) -> T {
        let u = self.to_components(x);
        self.components
            .iter()
            .zip(&u)
            .map(|(c, &uj)| c.log_pdf(uj))
            .sum::<T>()
            - self.log_abs_det
    }

    fn covariance(&self) -> Matrix<T> {
        self.cov.clone()
    }

    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [T]) {
        let u: Vec<T> = self.components.iter().map(|c| c.sample(rng)).collect();
        let x = self.from_components(&u);
        out[..x.len()].copy_from_slice(&x);
    }

    fn is_gaussian(&self) -> bool {
        self.components.iter().all(|c| c.is_gaussian())
    }

    fn regular_score(&self) -> bool {
        self.components.iter().all(|c| c.regular_score())
    }
}

/// Any supported law, by value.
#[derive(Debug, Clone)]
pub enum MultiModel<T: Real> {
    Univariate(DensityModel1D<T>),
    Gaussian(GaussianModel<T>),
    Product(ProductModel<T>),
}

macro_rules! dispatch {
    ($self:ident, $m:ident => $e:expr) => {
        match $self {
            MultiModel::Univariate($m) => $e,
            MultiModel::Gaussian($m) => $e,
            MultiModel::Product($m) => $e,
        }
    };
}

impl<T: Real> Model<T> for MultiModel<T> {
    fn dim(&self) -> usize {
        dispatch!(self, m => m.dim())
    }

    fn name(&self) -> String {
        dispatch!(self, m => Model::name(m))
    }

    fn score_at(&self, x: &[T]) -> Result<Vec<T>> {
        dispatch!(self, m => m.score_at(x))
    }

    fn log_pdf_at(&self, x: &[T]) -> T {
        dispatch!(self, m => m.log_pdf_at(x))
    }

    fn covariance(&self) -> Matrix<T> {
        dispatch!(self, m => m.covariance())
    }

    fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [T]) {
        dispatch!(self, m => m.sample_into(rng, out))
    }

    fn is_gaussian(&self) -> bool {
        dispatch!(self, m => Model::is_gaussian(m))
    }

    fn regular_score(&self) -> bool {
        dispatch!(self, m => Model::regular_score(m))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_score_is_minus_precision_times_x() {
        let g = GaussianModel::<f64>::standard(2);
        assert_eq!(g.score_at(&[1.0, 2.0]).unwrap(), vec![-1.0, -2.0]);
        let c = Matrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let g = GaussianModel::new(c.clone()).unwrap();
        let x = [0.3_f64, -1.2];
        let s = g.score_at(&x).unwrap();
        let back = c.mul_vec(&s);
        assert!((back[0] + x[0]).abs() < 1e-14 && (back[1] + x[1]).abs() < 1e-14);
    }

    #[test]
    fn product_score_factorizes() {
        let e = DensityModel1D::<f64>::exp_centered();
        let l = DensityModel1D::<f64>::laplace();
        let p = ProductModel::new(vec![e.clone(), l.clone()], None).unwrap();
        let s = p.score_at(&[0.5, -0.3]).unwrap();
        assert_eq!(s, vec![e.score(0.5).unwrap(), l.score(-0.3).unwrap()]);
        match p.score_at(&[0.0, 0.0]).and(p.score_at(&[-3.0, 0.2])) {
            Err(Error::Domain { coordinate, .. }) => assert_eq!(coordinate, 0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mapped_product_covariance_and_score() {
        let g = DensityModel1D::<f64>::gaussian();
        let a = Matrix::from_rows(&[vec![1.0, 0.5], vec![0.0, 2.0]]).unwrap();
        let p = ProductModel::new(vec![g.clone(), g], Some(a.clone())).unwrap();
        let c = &a * &a.transpose();
        assert!((&p.covariance() - &c).max_abs() < 1e-14);
        // Gaussian push-forward: score is -C^{-1} x
        let gm = GaussianModel::new(c).unwrap();
        let x = [0.7, -0.4];
        let (s1, s2) = (p.score_at(&x).unwrap(), gm.score_at(&x).unwrap());
        assert!((s1[0] - s2[0]).abs() < 1e-12 && (s1[1] - s2[1]).abs() < 1e-12);
        assert!((p.log_pdf_at(&x) - gm.log_pdf_at(&x)).abs() < 1e-12);
    }

    #[test]
    fn singular_map_rejected() {
        let g = DensityModel1D::<f64>::gaussian();
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(ProductModel::new(vec![g.clone(), g], Some(a)).is_err());
    }
}
