//! Piecewise cubic interpolation on uniform grids.

use crate::scalar::Real;

/// Cubic Hermite interpolant on `[x0, x0 + h]` from end values and slopes,
/// evaluated at local coordinate `u = (x - x0) / h`. Returns value and derivative.
#[inline]
pub fn hermite<T: Real>(u: T, h: T, f0: T, f1: T, d0: T, d1: T) -> (T, T) {
    let one = T::one();
    let two = T::c(2.0);
    let three = T::c(3.0);
    let u2 = u * u;
    let u3 = u2 * u;
    let h00 = two * u3 - three * u2 + one;
    let h10 = u3 - two * u2 + u;
    let h01 = -two * u3 + three * u2;
    let h11 = u3 - u2;
    let v = h00 * f0 + h10 * h * d0 + h01 * f1 + h11 * h * d1;
    let dh00 = T::c(6.0) * (u2 - u);
    let dh10 = three * u2 - T::c(4.0) * u + one;
    let dh01 = -dh00;
    let dh11 = three * u2 - two * u;
    let dv = (dh00 * f0 + dh01 * f1) / h + dh10 * d0 + dh11 * d1;
    (v, dv)
}

/// Uniform grid `x_i = start + i * step`, `i = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformGrid<T> {
    pub start: T,
    pub step: T,
    pub n: usize,
}

impl<T: Real> UniformGrid<T> {
    pub fn spanning(lo: T, hi: T, n: usize) -> Self {
        assert!(n >= 2, "grid needs at least two points");
        Self {
            start: lo,
            step: (hi - lo) / T::from_usize_lossy(n - 1),
            n,
        }
    }

    #[inline]
    pub fn x(&self, i: usize) -> T {
        self.start + self.step * T::from_usize_lossy(i)
    }

    pub fn end(&self) -> T {
        self.x(self.n - 1)
    }

    pub fn points(&self) -> Vec<T> {
        (0..self.n).map(|i| self.x(i)).collect()
    }

    /// Cell index and local coordinate in `[0, 1]`, or `None` outside the grid.
    #[inline]
    pub fn locate(&self, x: T) -> Option<(usize, T)> {
        let pos = (x - self.start) / self.step;
        if !(pos >= T::zero()) || pos > T::from_usize_lossy(self.n - 1) {
            return None;
        }
        let i = pos.floor().to_usize().unwrap_or(0).min(self.n - 2);
        Some((i, pos - T::from_usize_lossy(i)))
    }
}

/// Catmull-Rom style slopes (central differences, one-sided at the ends).
pub fn finite_difference_slopes<T: Real>(values: &[T], step: T) -> Vec<T> {
    let n = values.len();
    let mut d = vec![T::zero(); n];
    if n < 2 {
        return d;
    }
    d[0] = (values[1] - values[0]) / step;
    d[n - 1] = (values[n - 1] - values[n - 2]) / step;
    for i in 1..n - 1 {
        d[i] = (values[i + 1] - values[i - 1]) / (T::c(2.0) * step);
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_reproduces_cubics() {
        let f = |x: f64| 1.0 + 2.0 * x - 0.5 * x * x + 0.25 * x * x * x;
        let df = |x: f64| 2.0 - x + 0.75 * x * x;
        let (x0, h) = (0.3, 0.7);
        for k in 0..=10 {
            let u = k as f64 / 10.0;
            let (v, dv) = hermite(u, h, f(x0), f(x0 + h), df(x0), df(x0 + h));
            assert!((v - f(x0 + u * h)).abs() < 1e-14);
            assert!((dv - df(x0 + u * h)).abs() < 1e-13);
        }
    }

    #[test]
    fn locate_handles_ends() {
        let g = UniformGrid::spanning(0.0_f64, 1.0, 11);
        assert_eq!(g.locate(1.0).unwrap().0, 9);
        assert!(g.locate(-1e-9).is_none());
        assert!(g.locate(1.0 + 1e-9).is_none());
        let (i, u) = g.locate(0.35).unwrap();
        assert_eq!(i, 3);
        assert!((u - 0.5).abs() < 1e-12);
    }
}
