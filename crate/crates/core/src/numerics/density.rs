use crate::models::Support;
use crate::scalar::Real;

/// Partition size used when integrating against an analytic density.
pub const DEFAULT_CELLS: usize = 4096;

/// A univariate probability density that numeric engines can integrate against.
pub trait Density1D<T: Real>: Sync {
    fn pdf(&self, x: T) -> T;

    /// Derivative of the absolutely continuous part of the density. Jumps
    /// are reported separately by [`Density1D::jumps`].
    fn pdf_derivative(&self, x: T) -> T;

    /// Locations and sizes `f(x+) - f(x-)` of density jumps.
    fn jumps(&self) -> Vec<(T, T)> {
        Vec::new()
    }

    fn support(&self) -> Support<T>;

    /// Points where the density or its derivative is not smooth, including
    /// finite support endpoints.
    fn breakpoints(&self) -> Vec<T>;

    fn mean(&self) -> T;

    fn variance(&self) -> T;

    fn std_dev(&self) -> T {
        self.variance().sqrt()
    }

    /// Finite interval carrying all but a negligible amount of mass.
    fn effective_range(&self) -> (T, T) {
        let s = self.support();
        let k = T::c(40.0) * self.std_dev();
        (s.lo().max(self.mean() - k), s.hi().min(self.mean() + k))
    }

    /// Sorted partition of [`Density1D::effective_range`] fine enough for
    /// low-order Gauss-Legendre on each cell.
    fn cells(&self) -> Vec<T> {
        let (lo, hi) = self.effective_range();
        let n = DEFAULT_CELLS;
        let h = (hi - lo) / T::from_usize_lossy(n);
        let mut pts: Vec<T> = (0..=n).map(|i| lo + h * T::from_usize_lossy(i)).collect();
        pts.extend(self.breakpoints().into_iter().filter(|&b| b > lo && b < hi));
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        pts
    }
}
