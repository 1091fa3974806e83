use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupportKind {
    FullLine,
    Interval,
    HalfLine,
}

/// Support of a univariate law as an interval of the extended reals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Support<T> {
    lo: T,
    hi: T,
}

impl<T: Real> Support<T> {
    pub fn new(lo: T, hi: T) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::InvalidParameter(format!(
                "support endpoints must satisfy lo < hi (got {lo}, {hi})"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn full_line() -> Self {
        Self {
            lo: T::neg_infinity(),
            hi: T::infinity(),
        }
    }

    pub fn lo(&self) -> T {
        self.lo
    }

    pub fn hi(&self) -> T {
        self.hi
    }

    pub fn kind(&self) -> SupportKind {
        match (self.lo.is_finite(), self.hi.is_finite()) {
            (false, false) => SupportKind::FullLine,
            (true, true) => SupportKind::Interval,
            _ => SupportKind::HalfLine,
        }
    }

    /// Open interior membership.
    pub fn contains_interior(&self, x: T) -> bool {
        x > self.lo && x < self.hi
    }

    /// Finite endpoints, in increasing order.
    pub fn finite_endpoints(&self) -> Vec<T> {
        [self.lo, self.hi].into_iter().filter(|v| v.is_finite()).collect()
    }

    /// Image under `x -> a x + b` with `a != 0`.
    pub fn affine(&self, a: T, b: T) -> Self {
        let (p, q) = (a * self.lo + b, a * self.hi + b);
        let (p, q) = if a > T::zero() { (p, q) } else { (q, p) };
        // inf * 0 cannot occur because a != 0; -inf * a keeps its sign.
        Self { lo: p, hi: q }
    }

    pub fn describe(&self) -> String {
        let fmt = |v: T| {
            if v == T::infinity() {
                "inf".to_string()
            } else if v == T::neg_infinity() {
                "-inf".to_string()
            } else {
                format!("{:.6}", v.f64())
            }
        };
        format!("({}, {})", fmt(self.lo), fmt(self.hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_interval() {
        assert!(Support::new(1.0_f64, 1.0).is_err());
        assert!(Support::new(2.0_f64, 1.0).is_err());
    }

    #[test]
    fn kinds_and_membership() {
        let s = Support::new(-1.0_f64, f64::INFINITY).unwrap();
        assert_eq!(s.kind(), SupportKind::HalfLine);
        assert!(!s.contains_interior(-1.0));
        assert!(s.contains_interior(-0.999));
        assert_eq!(Support::<f64>::full_line().kind(), SupportKind::FullLine);
        let u = Support::new(-3.0_f64.sqrt(), 3.0_f64.sqrt()).unwrap();
        assert_eq!(u.kind(), SupportKind::Interval);
        let flipped = s.affine(-2.0, 0.0);
        assert_eq!(flipped.lo(), f64::NEG_INFINITY);
        assert_eq!(flipped.hi(), 2.0);
    }
}
