//! Adaptive and fixed quadrature rules.
//!
//! [`integrate`] is the single entry point used by the model and functional
//! code; it truncates unbounded domains at a multiple of a caller-supplied
//! scale and honours interior breakpoints (jumps and kinks of densities).
//! The vector-valued Gauss-Kronrod driver [`gauss_kronrod`] lets several
//! integrals over the same integrand evaluation share one adaptive mesh.

use std::collections::BinaryHeap;
use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureRule {
    AdaptiveSimpson,
    GaussKronrod,
    GaussHermite,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec<T> {
    pub rule: QuadratureRule,
    pub abs_tol: T,
    pub rel_tol: T,
    pub max_depth: usize,
    /// Unbounded domains are truncated at `center +- truncation * scale`.
    pub truncation: T,
}

impl<T: Real> Default for QuadratureSpec<T> {
    fn default() -> Self {
        Self {
            rule: QuadratureRule::GaussKronrod,
            abs_tol: T::c(1e-12),
            rel_tol: T::c(1e-12),
            max_depth: 50,
            truncation: T::c(40.0),
        }
    }
}

impl<T: Real> QuadratureSpec<T> {
    pub fn with_rule(mut self, rule: QuadratureRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn with_abs_tol(mut self, tol: T) -> Self {
        self.abs_tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > T::zero()) {
            return Err(Error::InvalidParameter("abs_tol must be positive".into()));
        }
        if self.max_depth < 10 {
            return Err(Error::InvalidParameter("max_depth must be at least 10".into()));
        }
        Ok(())
    }

    fn max_intervals(&self) -> usize {
        // Bisection depth `max_depth` on a single feature needs about that many
        // live intervals per breakpoint; allow generous headroom.
        200 * self.max_depth
    }
}

/// Integration domain with possibly infinite endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain<T> {
    pub lo: T,
    pub hi: T,
    /// Location and scale used to truncate infinite endpoints.
    pub center: T,
    pub scale: T,
}

impl<T: Real> Domain<T> {
    pub fn finite(lo: T, hi: T) -> Self {
        Self {
            lo,
            hi,
            center: (lo + hi) / T::c(2.0),
            scale: (hi - lo).abs(),
        }
    }

    pub fn real_line(center: T, scale: T) -> Self {
        Self {
            lo: T::neg_infinity(),
            hi: T::infinity(),
            center,
            scale,
        }
    }

    pub fn new(lo: T, hi: T, center: T, scale: T) -> Self {
        Self { lo, hi, center, scale }
    }

    /// Finite interval actually integrated over.
    pub fn truncated(&self, k: T) -> (T, T) {
        let lo = if self.lo.is_finite() {
            self.lo
        } else {
            self.center - k * self.scale
        };
        let hi = if self.hi.is_finite() {
            self.hi
        } else {
            self.center + k * self.scale
        };
        (lo, hi)
    }
}

/// Scalar integral over `domain`, splitting at `breaks` that fall inside it.
pub fn integrate<T: Real>(
    f: impl Fn(T) -> T,
    domain: Domain<T>,
    breaks: &[T],
    spec: &QuadratureSpec<T>,
) -> Result<T> {
    spec.validate()?;
    let (a, b) = domain.truncated(spec.truncation);
    if !(b > a) {
        return Ok(T::zero());
    }
    let mut breaks = breaks.to_vec();
    if !(domain.lo.is_finite() && domain.hi.is_finite()) {
        // Seed the partition near the bulk so the first sweep cannot miss it.
        for k in [0.0, 1.0, 2.0, 4.0, 8.0, 16.0] {
            breaks.push(domain.center - T::c(k) * domain.scale);
            breaks.push(domain.center + T::c(k) * domain.scale);
        }
    }
    let breaks = &breaks[..];
    match spec.rule {
        QuadratureRule::AdaptiveSimpson => {
            let pts = partition(a, b, breaks);
            let mut total = T::zero();
            let tol = spec.abs_tol / T::from_usize_lossy(pts.len() - 1);
            for w in pts.windows(2) {
                total += adaptive_simpson(&f, w[0], w[1], tol, spec.max_depth)?;
            }
            Ok(total)
        }
        QuadratureRule::GaussKronrod => {
            let r = gauss_kronrod(|x| [f(x)], a, b, breaks, spec)?;
            Ok(r.value[0])
        }
        QuadratureRule::GaussHermite => {
            if domain.lo.is_finite() || domain.hi.is_finite() {
                return Err(Error::InvalidParameter(
                    "gauss-hermite rule needs the whole real line".into(),
                ));
            }
            Ok(gauss_hermite_integral(&f, domain.center, domain.scale, 64))
        }
    }
}

/// Sorted partition points `a = p0 < ... < pk = b` including interior breaks.
pub fn partition<T: Real>(a: T, b: T, breaks: &[T]) -> Vec<T> {
    let mut pts = vec![a];
    let mut inner: Vec<T> = breaks
        .iter()
        .copied()
        .filter(|&x| x.is_finite() && x > a && x < b)
        .collect();
    inner.sort_by(|x, y| x.partial_cmp(y).unwrap());
    inner.dedup();
    pts.extend(inner);
    pts.push(b);
    pts
}

fn adaptive_simpson<T: Real>(f: &impl Fn(T) -> T, a: T, b: T, tol: T, max_depth: usize) -> Result<T> {
    let two = T::c(2.0);
    let m = (a + b) / two;
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / T::c(6.0) * (fa + T::c(4.0) * fm + fb);
    let mut err = T::zero();
    let mut failed = false;
    let v = simpson_rec(f, a, b, fa, fm, fb, whole, tol, max_depth, &mut err, &mut failed);
    if failed {
        return Err(Error::DepthExhausted {
            estimate: v.f64(),
            error_estimate: err.f64(),
        });
    }
    Ok(v)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<T: Real>(
    f: &impl Fn(T) -> T,
    a: T,
    b: T,
    fa: T,
    fm: T,
    fb: T,
    whole: T,
    tol: T,
    depth: usize,
    err: &mut T,
    failed: &mut bool,
) -> T {
    let two = T::c(2.0);
    let m = (a + b) / two;
    let lm = (a + m) / two;
    let rm = (m + b) / two;
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / T::c(6.0) * (fa + T::c(4.0) * flm + fm);
    let right = (b - m) / T::c(6.0) * (fm + T::c(4.0) * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= T::c(15.0) * tol {
        return left + right + delta / T::c(15.0);
    }
    if depth == 0 || (b - a).abs() <= T::epsilon() * (a.abs() + b.abs()) {
        *failed = true;
        *err += delta.abs() / T::c(15.0);
        return left + right + delta / T::c(15.0);
    }
    simpson_rec(f, a, m, fa, flm, fm, left, tol / two, depth - 1, err, failed)
        + simpson_rec(f, m, b, fm, frm, fb, right, tol / two, depth - 1, err, failed)
}

// Gauss-Kronrod 7/15 abscissae and weights on [-1, 1] (QUADPACK qk15).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Result of a vector-valued adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<T, const K: usize> {
    pub value: [T; K],
    pub error: [T; K],
    pub evaluations: usize,
}

fn kronrod_panel<T: Real, const K: usize>(
    f: &impl Fn(T) -> [T; K],
    a: T,
    b: T,
) -> ([T; K], [T; K]) {
    let half = (b - a) / T::c(2.0);
    let center = (a + b) / T::c(2.0);
    let fc = f(center);
    let mut kron = [T::zero(); K];
    let mut gauss = [T::zero(); K];
    for k in 0..K {
        kron[k] = fc[k] * T::c(WGK[7]);
        gauss[k] = fc[k] * T::c(WG[3]);
    }
    for j in 0..7 {
        let dx = half * T::c(XGK[j]);
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        for k in 0..K {
            let s = f1[k] + f2[k];
            kron[k] += s * T::c(WGK[j]);
            if j % 2 == 1 {
                gauss[k] += s * T::c(WG[j / 2]);
            }
        }
    }
    let mut val = [T::zero(); K];
    let mut err = [T::zero(); K];
    for k in 0..K {
        val[k] = kron[k] * half;
        err[k] = ((kron[k] - gauss[k]) * half).abs();
    }
    (val, err)
}

struct Panel<T, const K: usize> {
    a: T,
    b: T,
    value: [T; K],
    error: [T; K],
    key: f64,
}

impl<T, const K: usize> PartialEq for Panel<T, K> {
    fn eq(&self, o: &Self) -> bool {
        self.key == o.key
    }
}
impl<T, const K: usize> Eq for Panel<T, K> {}
impl<T, const K: usize> PartialOrd for Panel<T, K> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl<T, const K: usize> Ord for Panel<T, K> {
    fn cmp(&self, o: &Self) -> Ordering {
        self.key.partial_cmp(&o.key).unwrap_or(Ordering::Equal)
    }
}

/// Globally adaptive Gauss-Kronrod (7/15) integration of a vector-valued
/// integrand over the finite interval `[a, b]`.
///
/// Converged when, for every component, the summed error estimate is below
/// `max(abs_tol, rel_tol * |value|)`.
pub fn gauss_kronrod<T: Real, const K: usize>(
    f: impl Fn(T) -> [T; K],
    a: T,
    b: T,
    breaks: &[T],
    spec: &QuadratureSpec<T>,
) -> Result<QuadResult<T, K>> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::InvalidParameter("gauss_kronrod needs finite limits".into()));
    }
    if b <= a {
        return Ok(QuadResult {
            value: [T::zero(); K],
            error: [T::zero(); K],
            evaluations: 0,
        });
    }
    let pts = partition(a, b, breaks);
    let mut heap = BinaryHeap::new();
    let mut total = [T::zero(); K];
    let mut total_err = [T::zero(); K];
    let mut evals = 0usize;
    let key_of = |e: &[T; K]| e.iter().fold(0.0_f64, |m, v| m.max(v.f64()));
    for w in pts.windows(2) {
        let (v, e) = kronrod_panel(&f, w[0], w[1]);
        evals += 15;
        for k in 0..K {
            total[k] += v[k];
            total_err[k] += e[k];
        }
        heap.push(Panel {
            a: w[0],
            b: w[1],
            value: v,
            error: e,
            key: key_of(&e),
        });
    }
    let converged = |tot: &[T; K], err: &[T; K]| {
        (0..K).all(|k| err[k] <= spec.abs_tol.max(spec.rel_tol * tot[k].abs()))
    };
    let limit = spec.max_intervals() + pts.len();
    while !converged(&total, &total_err) {
        if heap.len() >= limit {
            return Err(Error::DepthExhausted {
                estimate: total[0].f64(),
                error_estimate: total_err[0].f64(),
            });
        }
        let worst = heap.pop().expect("non-empty panel heap");
        let m = (worst.a + worst.b) / T::c(2.0);
        if !(m > worst.a && m < worst.b) {
            // Panel at floating point resolution: accept its contribution.
            heap.push(Panel { key: 0.0, ..worst });
            if heap.iter().all(|p| p.key == 0.0) {
                break;
            }
            continue;
        }
        let (v1, e1) = kronrod_panel(&f, worst.a, m);
        let (v2, e2) = kronrod_panel(&f, m, worst.b);
        evals += 30;
        for k in 0..K {
            total[k] += v1[k] + v2[k] - worst.value[k];
            total_err[k] += e1[k] + e2[k] - worst.error[k];
        }
        heap.push(Panel { a: worst.a, b: m, value: v1, error: e1, key: key_of(&e1) });
        heap.push(Panel { a: m, b: worst.b, value: v2, error: e2, key: key_of(&e2) });
    }
    // Re-sum from the panels to shed accumulated update round-off.
    let mut value = [T::zero(); K];
    let mut error = [T::zero(); K];
    let mut panels: Vec<_> = heap.into_vec();
    panels.sort_by(|p, q| p.a.partial_cmp(&q.a).unwrap());
    for p in &panels {
        for k in 0..K {
            value[k] += p.value[k];
            error[k] += p.error[k];
        }
    }
    for v in &value {
        if !v.is_finite() {
            return Err(Error::numeric("gauss_kronrod", "non-finite integral"));
        }
    }
    Ok(QuadResult { value, error, evaluations: evals })
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` (Newton on the Legendre recurrence).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Gauss-Hermite (physicists', weight `exp(-x^2)`) nodes and weights.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let nf = n as f64;
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-0.16667),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..200 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 3e-14 {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    x.reverse();
    w.reverse();
    (x, w)
}

/// `int f(x) dx` over the real line by Gauss-Hermite with the Gaussian weight
/// matched to `N(center, scale^2)`: exact for Gaussian times polynomial.
pub fn gauss_hermite_integral<T: Real>(f: &impl Fn(T) -> T, center: T, scale: T, n: usize) -> T {
    let (x, w) = gauss_hermite(n);
    let s = scale * T::c(std::f64::consts::SQRT_2);
    x.iter()
        .zip(&w)
        .map(|(&xi, &wi)| T::c(wi * (xi * xi).exp()) * f(center + s * T::c(xi)))
        .sum::<T>()
        * s
}

/// Composite Gauss-Legendre over the partition `pts` with `order` nodes per panel.
pub fn composite_legendre<T: Real>(f: impl Fn(T) -> T, pts: &[T], order: usize) -> T {
    let (x, w) = gauss_legendre(order);
    let mut total = T::zero();
    for p in pts.windows(2) {
        let half = (p[1] - p[0]) / T::c(2.0);
        let mid = (p[1] + p[0]) / T::c(2.0);
        let mut s = T::zero();
        for (&xi, &wi) in x.iter().zip(&w) {
            s += T::c(wi) * f(mid + half * T::c(xi));
        }
        total += s * half;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::std_normal_pdf;

    #[test]
    fn kronrod_weights_sum_to_two() {
        let s: f64 = 2.0 * WGK[..7].iter().sum::<f64>() + WGK[7];
        let g: f64 = 2.0 * WG[..3].iter().sum::<f64>() + WG[3];
        assert!((s - 2.0).abs() < 1e-15 && (g - 2.0).abs() < 1e-15);
    }

    #[test]
    fn kronrod_panel_exact_for_high_degree_polynomials() {
        // K15 integrates degree <= 22 exactly.
        let (v, _) = kronrod_panel(&|x: f64| [x.powi(22)], -1.0, 1.0);
        assert!((v[0] - 2.0 / 23.0).abs() < 1e-15);
    }

    #[test]
    fn x_squared_on_unit_interval() {
        for rule in [QuadratureRule::AdaptiveSimpson, QuadratureRule::GaussKronrod] {
            let spec = QuadratureSpec::default().with_rule(rule);
            let v = integrate(|x: f64| x * x, Domain::finite(0.0, 1.0), &[], &spec).unwrap();
            assert!((v - 1.0 / 3.0).abs() < 1e-12, "{rule:?}: {v}");
        }
    }

    #[test]
    fn normal_density_and_second_moment() {
        for rule in [
            QuadratureRule::AdaptiveSimpson,
            QuadratureRule::GaussKronrod,
            QuadratureRule::GaussHermite,
        ] {
            let spec = QuadratureSpec::default().with_rule(rule);
            let dom = Domain::real_line(0.0, 1.0);
            let m0 = integrate(std_normal_pdf::<f64>, dom, &[], &spec).unwrap();
            let m2 = integrate(|x| x * x * std_normal_pdf(x), dom, &[], &spec).unwrap();
            assert!((m0 - 1.0).abs() < 1e-10, "{rule:?} mass {m0}");
            assert!((m2 - 1.0).abs() < 1e-10, "{rule:?} second moment {m2}");
        }
    }

    #[test]
    fn breakpoints_handle_jumps() {
        let spec = QuadratureSpec::default();
        let step = |x: f64| if x < 0.3 { 1.0 } else { 2.0 };
        let v = integrate(step, Domain::finite(0.0, 1.0), &[0.3], &spec).unwrap();
        assert!((v - 1.7).abs() < 1e-14);
    }

    #[test]
    fn depth_exhaustion_is_reported() {
        let spec = QuadratureSpec {
            rule: QuadratureRule::AdaptiveSimpson,
            abs_tol: 1e-14,
            max_depth: 10,
            ..QuadratureSpec::default()
        };
        let r = integrate(|x: f64| x.abs().sqrt().recip(), Domain::finite(-1.0, 1.0), &[], &spec);
        assert!(matches!(r, Err(Error::DepthExhausted { .. })));
    }

    #[test]
    fn legendre_and_hermite_rules() {
        let (x, w) = gauss_legendre(32);
        let s: f64 = x.iter().zip(&w).map(|(&x, &w)| w * x.powi(62)).sum();
        assert!((s - 2.0 / 63.0).abs() < 1e-14);
        let (x, w) = gauss_hermite(20);
        let m4: f64 = x.iter().zip(&w).map(|(&x, &w)| w * x.powi(4)).sum();
        assert!((m4 - 0.75 * std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn single_precision_quadrature() {
        let spec = QuadratureSpec::<f32> {
            abs_tol: 1e-6,
            rel_tol: 1e-6,
            ..QuadratureSpec::default()
        };
        let v = integrate(|x: f32| x * x, Domain::finite(0.0, 1.0), &[], &spec).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-6);
    }
}
