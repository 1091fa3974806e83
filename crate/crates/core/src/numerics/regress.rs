//! Kernel regression of conditional expectations `w -> E[target | W = w]`.
//!
//! Samples are linearly binned on a fine grid; the fit is evaluated on a
//! coarser node grid spanning the empirical quantile box of the conditioning
//! variable (`[1%, 99%]` by default) and read back by multilinear interpolation. Points
//! outside the box are clamped to it and flagged.

use serde::{Deserialize, Serialize};

use super::stats::{quantile_sorted, sorted};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegressionMethod {
    NadarayaWatson,
    LocalLinear,
    BinnedMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bandwidth {
    /// `1.06 sd n^{-1/5}` in one dimension, `sd n^{-1/(d+4)}` per coordinate otherwise.
    Silverman,
    /// A multiple of the Silverman bandwidth.
    SilvermanScaled(f64),
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionalRegressor {
    pub method: RegressionMethod,
    pub bandwidth: Bandwidth,
    /// Cells per coordinate in binned-mean mode.
    pub bins: usize,
    /// Probability cut from each tail of every coordinate when forming the
    /// evaluation box.
    #[serde(default = "default_tail")]
    pub tail: f64,
}

fn default_tail() -> f64 {
    0.01
}

impl Default for ConditionalRegressor {
    fn default() -> Self {
        Self {
            method: RegressionMethod::NadarayaWatson,
            bandwidth: Bandwidth::Silverman,
            bins: 64,
            tail: default_tail(),
        }
    }
}

impl ConditionalRegressor {
    pub fn with_method(mut self, method: RegressionMethod) -> Self {
        self.method = method;
        self
    }

    pub fn with_bandwidth(mut self, bandwidth: Bandwidth) -> Self {
        self.bandwidth = bandwidth;
        self
    }

    pub fn with_tail(mut self, tail: f64) -> Self {
        self.tail = tail;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tail >= 0.0 && self.tail < 0.5) {
            return Err(Error::InvalidParameter(format!("tail cut {} not in [0, 0.5)", self.tail)));
        }
        if let Bandwidth::Fixed(h) | Bandwidth::SilvermanScaled(h) = self.bandwidth {
            if !(h > 0.0 && h.is_finite()) {
                return Err(Error::InvalidParameter(format!("bandwidth must be positive, got {h}")));
            }
        }
        if self.method == RegressionMethod::BinnedMean && self.bins < 2 {
            return Err(Error::InvalidParameter("binned mean needs at least 2 bins".into()));
        }
        Ok(())
    }
}

/// Smallest sample count accepted by [`regress_conditional`].
pub const MIN_PAIRS: usize = 1000;
const KERNEL_CUTOFF: f64 = 5.0;

fn node_count(d: usize) -> usize {
    match d {
        1 => 512,
        2 => 96,
        _ => 32,
    }
}

fn bin_count(d: usize) -> usize {
    match d {
        1 => 4096,
        2 => 256,
        _ => 64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
struct Axis {
    lo: f64,
    step: f64,
    n: usize,
}

impl Axis {
    fn new(lo: f64, hi: f64, n: usize) -> Self {
        let step = if hi > lo { (hi - lo) / (n - 1) as f64 } else { 1.0 };
        Self { lo, step, n }
    }

    fn x(&self, i: usize) -> f64 {
        self.lo + self.step * i as f64
    }

    fn hi(&self) -> f64 {
        self.x(self.n - 1)
    }

    /// Cell index and local coordinate of a point clamped to the axis.
    fn locate(&self, x: f64) -> (usize, f64) {
        let pos = ((x - self.lo) / self.step).clamp(0.0, (self.n - 1) as f64);
        let i = (pos.floor() as usize).min(self.n.saturating_sub(2));
        (i, pos - i as f64)
    }
}

/// Fitted values of one regression with per-node variance estimates.
#[derive(Debug, Clone)]
pub struct FittedRegression {
    dim: usize,
    targets: usize,
    axes: Vec<Axis>,
    /// node-major, `targets` values per node
    values: Vec<f64>,
    variances: Vec<f64>,
    low_mass: Vec<bool>,
    bandwidths: Vec<f64>,
    n: usize,
}

/// Value of a fitted regression at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub values: Vec<f64>,
    pub variances: Vec<f64>,
    /// Point was outside the quantile box and clamped to its boundary.
    pub clamped: bool,
    /// Neighbouring nodes had no kernel mass; the value was filled in.
    pub extrapolated: bool,
}

/// Fits `E[target | W]` from `n` pairs: `cond` is `n x d`, `targets` is
/// `n x k`, both row-major.
pub fn regress_conditional(
    cond: &[f64],
    d: usize,
    targets: &[f64],
    k: usize,
    reg: &ConditionalRegressor,
) -> Result<FittedRegression> {
    reg.validate()?;
    if !(1..=3).contains(&d) {
        return Err(Error::Capability(format!("conditioning dimension {d} not in 1..=3")));
    }
    if k == 0 || !cond.len().is_multiple_of(d) || !targets.len().is_multiple_of(k) {
        return Err(Error::InvalidParameter("malformed sample arrays".into()));
    }
    let n = cond.len() / d;
    if targets.len() / k != n {
        return Err(Error::InvalidParameter("conditioner and target counts differ".into()));
    }
    if n < MIN_PAIRS {
        return Err(Error::InvalidParameter(format!("need at least {MIN_PAIRS} pairs, have {n}")));
    }
    if let Some(i) = cond.iter().chain(targets).position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteSample { index: i });
    }
    let mut boxes = Vec::with_capacity(d);
    let mut bandwidths = Vec::with_capacity(d);
    for j in 0..d {
        let col: Vec<f64> = (0..n).map(|i| cond[i * d + j]).collect();
        let s = sorted(&col);
        let mean = col.iter().sum::<f64>() / n as f64;
        let sd = (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt();
        boxes.push((quantile_sorted(&s, reg.tail), quantile_sorted(&s, 1.0 - reg.tail)));
        let silverman = if d == 1 {
            1.06 * sd * (n as f64).powf(-0.2)
        } else {
            sd * (n as f64).powf(-1.0 / (d as f64 + 4.0))
        };
        let h = match reg.bandwidth {
            Bandwidth::Fixed(h) => h,
            Bandwidth::Silverman => silverman,
            Bandwidth::SilvermanScaled(c) => c * silverman,
        };
        bandwidths.push(h.max(1e-12));
    }
    match reg.method {
        RegressionMethod::BinnedMean => fit_binned_mean(cond, d, targets, k, n, &boxes, reg.bins, bandwidths),
        m => fit_kernel(cond, d, targets, k, n, &boxes, bandwidths, m == RegressionMethod::LocalLinear),
    }
}

fn flat_index(idx: &[usize], axes: &[Axis]) -> usize {
    let mut f = 0;
    for (i, a) in idx.iter().zip(axes) {
        f = f * a.n + i;
    }
    f
}

fn unflatten(mut f: usize, axes: &[Axis], out: &mut [usize]) {
    for j in (0..axes.len()).rev() {
        out[j] = f % axes[j].n;
        f /= axes[j].n;
    }
}

#[allow(clippy::too_many_arguments)]
fn fit_kernel(
    cond: &[f64],
    d: usize,
    targets: &[f64],
    k: usize,
    n: usize,
    boxes: &[(f64, f64)],
    bandwidths: Vec<f64>,
    local_linear: bool,
) -> Result<FittedRegression> {
    let nodes: Vec<Axis> = boxes.iter().map(|&(lo, hi)| Axis::new(lo, hi, node_count(d))).collect();
    let bins: Vec<Axis> = boxes
        .iter()
        .zip(&bandwidths)
        .map(|(&(lo, hi), &h)| Axis::new(lo - KERNEL_CUTOFF * h, hi + KERNEL_CUTOFF * h, bin_count(d)))
        .collect();
    let nbins: usize = bins.iter().map(|a| a.n).product();
    // per bin: count, then per target sum and sum of squares
    let stride = 1 + 2 * k;
    let mut acc = vec![0.0; nbins * stride];
    let corners = 1usize << d;
    let mut idx = vec![0usize; d];
    let mut frac = vec![0.0; d];
    'samples: for i in 0..n {
        let row = &cond[i * d..(i + 1) * d];
        for j in 0..d {
            let a = &bins[j];
            let pos = (row[j] - a.lo) / a.step;
            if pos < 0.0 || pos > (a.n - 1) as f64 {
                continue 'samples;
            }
            let c = (pos.floor() as usize).min(a.n - 2);
            idx[j] = c;
            frac[j] = pos - c as f64;
        }
        let t = &targets[i * k..(i + 1) * k];
        for corner in 0..corners {
            let mut w = 1.0;
            let mut f = 0;
            for j in 0..d {
                let up = (corner >> j) & 1 == 1;
                w *= if up { frac[j] } else { 1.0 - frac[j] };
                f = f * bins[j].n + idx[j] + usize::from(up);
            }
            if w == 0.0 {
                continue;
            }
            let slot = &mut acc[f * stride..(f + 1) * stride];
            slot[0] += w;
            for (q, &tv) in t.iter().enumerate() {
                slot[1 + q] += w * tv;
                slot[1 + k + q] += w * tv * tv;
            }
        }
    }

    let total_nodes: usize = nodes.iter().map(|a| a.n).product();
    let mut values = vec![0.0; total_nodes * k];
    let mut variances = vec![0.0; total_nodes * k];
    let mut low_mass = vec![false; total_nodes];
    let p = d + 1;
    let mut node_idx = vec![0usize; d];
    // 1-D kernel weights per coordinate: (first bin, weights)
    let mut kern: Vec<(usize, Vec<f64>)> = vec![(0, Vec::new()); d];
    for node in 0..total_nodes {
        unflatten(node, &nodes, &mut node_idx);
        let x: Vec<f64> = (0..d).map(|j| nodes[j].x(node_idx[j])).collect();
        for j in 0..d {
            let a = &bins[j];
            let h = bandwidths[j];
            let lo = (((x[j] - KERNEL_CUTOFF * h - a.lo) / a.step).ceil().max(0.0)) as usize;
            let hi = ((((x[j] + KERNEL_CUTOFF * h - a.lo) / a.step).floor()) as usize).min(a.n - 1);
            let w: Vec<f64> = (lo..=hi)
                .map(|b| {
                    let z = (a.x(b) - x[j]) / h;
                    (-0.5 * z * z).exp()
                })
                .collect();
            kern[j] = (lo, w);
        }
        let mut sw = 0.0;
        let mut sw2 = 0.0;
        let mut s1 = vec![0.0; k];
        let mut s2 = vec![0.0; k];
        let mut xtx = vec![0.0; p * p];
        let mut xty = vec![0.0; p * k];
        let mut off = vec![0usize; d];
        let lens: Vec<usize> = kern.iter().map(|(_, w)| w.len()).collect();
        if lens.contains(&0) {
            low_mass[node] = true;
            continue;
        }
        loop {
            let mut w = 1.0;
            let mut f = 0;
            for j in 0..d {
                w *= kern[j].1[off[j]];
                f = f * bins[j].n + kern[j].0 + off[j];
            }
            let slot = &acc[f * stride..(f + 1) * stride];
            if slot[0] > 0.0 {
                let wc = w * slot[0];
                sw += wc;
                sw2 += w * w * slot[0];
                for q in 0..k {
                    s1[q] += w * slot[1 + q];
                    s2[q] += w * slot[1 + k + q];
                }
                if local_linear {
                    let mut z = vec![1.0; p];
                    for j in 0..d {
                        z[j + 1] = (bins[j].x(kern[j].0 + off[j]) - x[j]) / bandwidths[j];
                    }
                    for r in 0..p {
                        for c in 0..p {
                            xtx[r * p + c] += wc * z[r] * z[c];
                        }
                        for q in 0..k {
                            xty[r * k + q] += w * slot[1 + q] * z[r];
                        }
                    }
                }
            }
            let mut j = d;
            loop {
                if j == 0 {
                    break;
                }
                j -= 1;
                off[j] += 1;
                if off[j] < lens[j] {
                    break;
                }
                off[j] = 0;
                if j == 0 {
                    j = usize::MAX;
                    break;
                }
            }
            if j == usize::MAX {
                break;
            }
        }
        if sw < 1e-8 {
            low_mass[node] = true;
            continue;
        }
        let n_eff = sw * sw / sw2.max(f64::MIN_POSITIVE);
        for q in 0..k {
            let m = s1[q] / sw;
            let var = (s2[q] / sw - m * m).max(0.0);
            let mut v = m;
            if local_linear {
                if let Some(beta) = solve_small(&xtx, &xty, p, k, q) {
                    v = beta;
                }
            }
            values[node * k + q] = v;
            variances[node * k + q] = var / n_eff;
        }
    }
    fill_low_mass(&mut values, &mut variances, &low_mass, k);
    Ok(FittedRegression { dim: d, targets: k, axes: nodes, values, variances, low_mass, bandwidths, n })
}

/// Intercept of the weighted least-squares fit for target `q`.
fn solve_small(xtx: &[f64], xty: &[f64], p: usize, k: usize, q: usize) -> Option<f64> {
    let mut a = xtx.to_vec();
    let mut b: Vec<f64> = (0..p).map(|r| xty[r * k + q]).collect();
    for c in 0..p {
        let piv = (c..p).max_by(|&i, &j| a[i * p + c].abs().total_cmp(&a[j * p + c].abs()))?;
        if a[piv * p + c].abs() < 1e-12 * a[0].abs().max(1e-300) {
            return None;
        }
        if piv != c {
            for j in 0..p {
                a.swap(piv * p + j, c * p + j);
            }
            b.swap(piv, c);
        }
        for r in c + 1..p {
            let f = a[r * p + c] / a[c * p + c];
            for j in c..p {
                a[r * p + j] -= f * a[c * p + j];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; p];
    for r in (0..p).rev() {
        let s: f64 = (r + 1..p).map(|j| a[r * p + j] * x[j]).sum();
        x[r] = (b[r] - s) / a[r * p + r];
    }
    x[0].is_finite().then_some(x[0])
}

/// Copies the nearest valid node (in flat order) into nodes without mass.
fn fill_low_mass(values: &mut [f64], variances: &mut [f64], low: &[bool], k: usize) {
    let valid: Vec<usize> = (0..low.len()).filter(|&i| !low[i]).collect();
    if valid.is_empty() {
        return;
    }
    for i in 0..low.len() {
        if low[i] {
            let j = match valid.binary_search(&i) {
                Ok(p) => valid[p],
                Err(p) => {
                    if p == 0 {
                        valid[0]
                    } else if p >= valid.len() {
                        valid[valid.len() - 1]
                    } else if i - valid[p - 1] <= valid[p] - i {
                        valid[p - 1]
                    } else {
                        valid[p]
                    }
                }
            };
            for q in 0..k {
                values[i * k + q] = values[j * k + q];
                variances[i * k + q] = variances[j * k + q];
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn fit_binned_mean(
    cond: &[f64],
    d: usize,
    targets: &[f64],
    k: usize,
    n: usize,
    boxes: &[(f64, f64)],
    bins: usize,
    bandwidths: Vec<f64>,
) -> Result<FittedRegression> {
    // nodes sit at cell centres of `bins` equal cells spanning the box
    let axes: Vec<Axis> = boxes
        .iter()
        .map(|&(lo, hi)| {
            let w = (hi - lo) / bins as f64;
            Axis::new(lo + w / 2.0, hi - w / 2.0, bins)
        })
        .collect();
    let total: usize = axes.iter().map(|a| a.n).product();
    let mut cnt = vec![0.0; total];
    let mut s1 = vec![0.0; total * k];
    let mut s2 = vec![0.0; total * k];
    let mut idx = vec![0usize; d];
    for i in 0..n {
        for j in 0..d {
            let a = &axes[j];
            let pos = ((cond[i * d + j] - (a.lo - a.step / 2.0)) / a.step).floor();
            idx[j] = pos.clamp(0.0, (a.n - 1) as f64) as usize;
        }
        let f = flat_index(&idx, &axes);
        cnt[f] += 1.0;
        for q in 0..k {
            let t = targets[i * k + q];
            s1[f * k + q] += t;
            s2[f * k + q] += t * t;
        }
    }
    let mut values = vec![0.0; total * k];
    let mut variances = vec![0.0; total * k];
    let mut low = vec![false; total];
    for f in 0..total {
        if cnt[f] < 2.0 {
            low[f] = true;
            continue;
        }
        for q in 0..k {
            let m = s1[f * k + q] / cnt[f];
            values[f * k + q] = m;
            variances[f * k + q] = (s2[f * k + q] / cnt[f] - m * m).max(0.0) / cnt[f];
        }
    }
    fill_low_mass(&mut values, &mut variances, &low, k);
    Ok(FittedRegression { dim: d, targets: k, axes, values, variances, low_mass: low, bandwidths, n })
}

impl FittedRegression {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn targets(&self) -> usize {
        self.targets
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> &[f64] {
        &self.bandwidths
    }

    /// `[lo, hi]` of the quantile box per coordinate.
    pub fn domain(&self) -> Vec<(f64, f64)> {
        self.axes.iter().map(|a| (a.lo, a.hi())).collect()
    }

    /// Multilinear interpolation of the node values.
    pub fn eval(&self, w: &[f64]) -> Evaluation {
        let d = self.dim;
        let k = self.targets;
        let mut clamped = false;
        let mut idx = vec![0usize; d];
        let mut frac = vec![0.0; d];
        for j in 0..d {
            let a = &self.axes[j];
            if w[j] < a.lo || w[j] > a.hi() {
                clamped = true;
            }
            let (i, u) = a.locate(w[j]);
            idx[j] = i;
            frac[j] = u;
        }
        let mut values = vec![0.0; k];
        let mut variances = vec![0.0; k];
        let mut extrapolated = false;
        let mut corner_idx = vec![0usize; d];
        for corner in 0..(1usize << d) {
            let mut wt = 1.0;
            for j in 0..d {
                let up = (corner >> j) & 1 == 1;
                wt *= if up { frac[j] } else { 1.0 - frac[j] };
                corner_idx[j] = (idx[j] + usize::from(up)).min(self.axes[j].n - 1);
            }
            if wt == 0.0 {
                continue;
            }
            let f = flat_index(&corner_idx, &self.axes);
            extrapolated |= self.low_mass[f];
            for q in 0..k {
                values[q] += wt * self.values[f * k + q];
                variances[q] += wt * self.variances[f * k + q];
            }
        }
        Evaluation { values, variances, clamped, extrapolated }
    }

    /// First target at a 1-D point.
    pub fn eval1(&self, w: f64) -> f64 {
        self.eval(&[w]).values[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::mc::MCSpec;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian_pairs(n: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
        // X ~ N(0,1), Y = X + N(0,1): E[X | Y] = Y / 2
        let xy: Vec<f64> = MCSpec::new(seed, n)
            .draw(2, |r, row| {
                let x: f64 = StandardNormal.sample(r);
                let e: f64 = StandardNormal.sample(r);
                row[0] = x;
                row[1] = x + e;
            })
            .unwrap();
        let x = xy.iter().step_by(2).copied().collect();
        let y = xy.iter().skip(1).step_by(2).copied().collect();
        (x, y)
    }

    #[test]
    fn gaussian_conditional_mean_at_zero() {
        let (x, y) = gaussian_pairs(100_000, 1);
        let fit = regress_conditional(&y, 1, &x, 1, &ConditionalRegressor::default()).unwrap();
        assert!(fit.eval1(0.0).abs() < 0.02);
        assert!((fit.eval1(1.0) - 0.5).abs() < 0.03);
    }

    #[test]
    fn independent_target_gives_flat_fit() {
        let (x, _) = gaussian_pairs(100_000, 2);
        let (_, y) = gaussian_pairs(100_000, 3);
        let fit = regress_conditional(&y, 1, &x, 1, &ConditionalRegressor::default()).unwrap();
        for w in [-1.5, 0.0, 0.8] {
            let e = fit.eval(&[w]);
            assert!(e.values[0].abs() < 4.0 * e.variances[0].sqrt() + 0.01, "{w}: {:?}", e);
        }
    }

    #[test]
    fn identity_regression_in_two_dimensions() {
        let spec = MCSpec::new(9, 50_000);
        let w: Vec<f64> = spec
            .draw(2, |r, row| {
                row[0] = StandardNormal.sample(r);
                row[1] = StandardNormal.sample(r);
            })
            .unwrap();
        let t: Vec<f64> = w.chunks(2).flat_map(|p| [p[0], p[0] + p[1]]).collect();
        for m in [RegressionMethod::NadarayaWatson, RegressionMethod::LocalLinear] {
            let reg = ConditionalRegressor::default().with_method(m);
            let fit = regress_conditional(&w, 2, &t, 2, &reg).unwrap();
            let e = fit.eval(&[0.4, -0.3]);
            assert!((e.values[0] - 0.4).abs() < 0.05, "{m:?} {:?}", e);
            assert!((e.values[1] - 0.1).abs() < 0.05, "{m:?} {:?}", e);
        }
    }

    #[test]
    fn clamping_is_flagged() {
        let (x, y) = gaussian_pairs(10_000, 4);
        let fit = regress_conditional(&y, 1, &x, 1, &ConditionalRegressor::default()).unwrap();
        assert!(fit.eval(&[10.0]).clamped);
        assert!(!fit.eval(&[0.0]).clamped);
    }

    #[test]
    fn binned_mean_and_validation() {
        let (x, y) = gaussian_pairs(100_000, 5);
        let reg = ConditionalRegressor::default().with_method(RegressionMethod::BinnedMean);
        let fit = regress_conditional(&y, 1, &x, 1, &reg).unwrap();
        assert!((fit.eval1(1.0) - 0.5).abs() < 0.05);
        assert!(regress_conditional(&y[..500], 1, &x[..500], 1, &reg).is_err());
        let bad = ConditionalRegressor::default().with_bandwidth(Bandwidth::Fixed(-1.0));
        assert!(regress_conditional(&y, 1, &x, 1, &bad).is_err());
    }
}
