//! Variational estimators: the supremum of `(E[X phi(Y)])^2` over centered,
//! normalized test functions, and the Stein representation of relative
//! Fisher information of standardized sums.
//!
//! The supremum over the span of a finite basis is a generalized Rayleigh
//! quotient `b^T G^{-1} b`, computed in closed form through the Cholesky
//! factor of the Gram matrix `G`. Because the factor of a leading block is
//! the leading block of the factor, the values for every nested degree are
//! partial sums of the same squares.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{cholesky_solve, Matrix};
use crate::models::{DensityModel1D, ProductModel};
use crate::numerics::mc::{MCSpec, Moments, BLOCK};
use crate::numerics::regress::ConditionalRegressor;
use crate::representations::{cross_fit, representation_regressor, scalar_mean};
use crate::stein_kernel::SteinKernel1D;

/// Ridge added to the Gram matrix when it is numerically singular.
pub const RIDGE: f64 = 1e-10;

/// Default degrees: 8 in one dimension, 6 per coordinate in two.
pub fn default_degree(d: usize) -> usize {
    if d == 1 {
        8
    } else {
        6
    }
}

/// Probabilists' Hermite polynomials `He_0..=He_k` at `x` and their
/// derivatives `He_j' = j He_{j-1}`.
pub fn hermite_table(x: f64, k: usize, val: &mut Vec<f64>, der: &mut Vec<f64>) {
    val.clear();
    der.clear();
    val.push(1.0);
    der.push(0.0);
    if k >= 1 {
        val.push(x);
        der.push(1.0);
    }
    for j in 1..k {
        let next = x * val[j] - j as f64 * val[j - 1];
        val.push(next);
        der.push((j + 1) as f64 * val[j]);
    }
}

/// Tensor Hermite polynomials in `d` coordinates, shifted and scaled so that
/// each has empirical mean 0 and second moment 1 on the sample it was
/// fitted to. Functions are ordered by maximal coordinate degree, so the
/// basis of degree `k` is a prefix of the basis of degree `k + 1`.
#[derive(Debug, Clone, Serialize)]
pub struct TestFunctionBasis {
    pub family: &'static str,
    pub dim: usize,
    pub max_degree: usize,
    /// Multi-indices, one per function.
    pub indices: Vec<Vec<usize>>,
    /// Per-coordinate location and scale applied before the polynomials.
    pub loc: Vec<f64>,
    pub scale: Vec<f64>,
    pub means: Vec<f64>,
    pub norms: Vec<f64>,
}

fn multi_indices(d: usize, k: usize) -> Vec<Vec<usize>> {
    let mut all: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..d {
        all = all
            .into_iter()
            .flat_map(|p| {
                (0..=k).map(move |a| {
                    let mut q = p.clone();
                    q.push(a);
                    q
                })
            })
            .collect();
    }
    all.retain(|a| a.iter().any(|&v| v > 0));
    all.sort_by_key(|a| *a.iter().max().unwrap());
    all
}

fn column_moments(y: &[f64], d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut m = vec![Moments::default(); d];
    for row in y.chunks(d) {
        for (acc, &v) in m.iter_mut().zip(row) {
            acc.push(v);
        }
    }
    (m.iter().map(Moments::mean).collect(), m.iter().map(|a| a.variance().sqrt()).collect())
}

impl TestFunctionBasis {
    /// Fits the centering and normalization to the rows of `y` (`n x d`).
    pub fn fit(y: &[f64], d: usize, max_degree: usize) -> Result<Self> {
        if d == 0 || !y.len().is_multiple_of(d) || y.len() < 2 * d {
            return Err(Error::InvalidParameter("need at least two sample rows".into()));
        }
        if max_degree == 0 {
            return Err(Error::InvalidParameter("max_degree must be at least 1".into()));
        }
        let (loc, scale) = column_moments(y, d);
        if scale.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::InvalidParameter("degenerate conditioning sample".into()));
        }
        let mut basis = Self {
            family: "hermite-polynomial",
            dim: d,
            max_degree,
            indices: multi_indices(d, max_degree),
            loc,
            scale,
            means: vec![],
            norms: vec![],
        };
        let p = basis.len();
        basis.means = vec![0.0; p];
        basis.norms = vec![1.0; p];
        // Two passes: means, then the population second moment about them.
        let rows = (y.len() / d) as f64;
        let mut raw = vec![0.0; p];
        let mut ws = Workspace::default();
        let mut sum = vec![0.0; p];
        for row in y.chunks(d) {
            basis.raw(row, &mut raw, None, &mut ws);
            for (a, &v) in sum.iter_mut().zip(&raw) {
                *a += v;
            }
        }
        let means: Vec<f64> = sum.iter().map(|s| s / rows).collect();
        let mut sq = vec![0.0; p];
        for row in y.chunks(d) {
            basis.raw(row, &mut raw, None, &mut ws);
            for ((a, &v), m) in sq.iter_mut().zip(&raw).zip(&means) {
                *a += (v - m) * (v - m);
            }
        }
        for (j, s) in sq.iter().enumerate() {
            let sd = (s / rows).sqrt();
            if !(sd > 0.0) {
                return Err(Error::InvalidParameter(format!("basis function {j} is constant on the sample")));
            }
            basis.norms[j] = sd;
        }
        basis.means = means;
        Ok(basis)
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Number of functions of maximal degree at most `k`.
    pub fn prefix_len(&self, k: usize) -> usize {
        self.indices.partition_point(|a| *a.iter().max().unwrap() <= k)
    }

    fn raw(&self, w: &[f64], val: &mut [f64], grad: Option<&mut [f64]>, ws: &mut Workspace) {
        let d = self.dim;
        ws.tables.resize_with(d, Default::default);
        for (j, t) in ws.tables.iter_mut().enumerate() {
            let u = (w[j] - self.loc[j]) / self.scale[j];
            hermite_table(u, self.max_degree, &mut t.0, &mut t.1);
        }
        for (f, a) in self.indices.iter().enumerate() {
            val[f] = a.iter().enumerate().map(|(j, &k)| ws.tables[j].0[k]).product();
        }
        if let Some(grad) = grad {
            for (f, a) in self.indices.iter().enumerate() {
                for c in 0..d {
                    let mut g = ws.tables[c].1[a[c]] / self.scale[c];
                    for (j, &k) in a.iter().enumerate() {
                        if j != c {
                            g *= ws.tables[j].0[k];
                        }
                    }
                    grad[f * d + c] = g;
                }
            }
        }
    }

    /// Values and, if requested, gradients (`len x dim`, row-major) at `w`.
    pub fn eval(&self, w: &[f64], val: &mut [f64], grad: Option<&mut [f64]>) {
        let mut ws = Workspace::default();
        self.eval_with(w, val, grad, &mut ws);
    }

    fn eval_with(&self, w: &[f64], val: &mut [f64], mut grad: Option<&mut [f64]>, ws: &mut Workspace) {
        self.raw(w, val, grad.as_deref_mut(), ws);
        for (f, v) in val.iter_mut().enumerate() {
            *v = (*v - self.means[f]) / self.norms[f];
        }
        if let Some(grad) = grad {
            for (f, g) in grad.chunks_mut(self.dim).enumerate() {
                for v in g {
                    *v /= self.norms[f];
                }
            }
        }
    }

    /// Empirical mean, its standard error and the second moment of every
    /// basis function on `y`.
    pub fn membership(&self, y: &[f64]) -> Vec<(f64, f64, f64)> {
        let p = self.len();
        let mut acc = vec![Moments::default(); p];
        let mut sq = vec![0.0; p];
        let mut val = vec![0.0; p];
        let mut ws = Workspace::default();
        for row in y.chunks(self.dim) {
            self.eval_with(row, &mut val, None, &mut ws);
            for f in 0..p {
                acc[f].push(val[f]);
                sq[f] += val[f] * val[f];
            }
        }
        let n = (y.len() / self.dim) as f64;
        acc.iter().zip(&sq).map(|(a, s)| (a.mean(), a.std_error(), s / n)).collect()
    }
}

#[derive(Default)]
struct Workspace {
    tables: Vec<(Vec<f64>, Vec<f64>)>,
}

/// Closed-form supremum of `(c . b)^2` over `c^T G c <= 1`.
#[derive(Debug, Clone, Serialize)]
pub struct RayleighSup {
    pub sup: f64,
    pub se: f64,
    /// Supremum over the degree-`k` prefix, `k = 1..=max_degree`.
    pub by_degree: Vec<f64>,
    /// Maximizing coefficients, scaled to `c^T G c = 1`.
    pub coefficients: Vec<f64>,
    pub ridge: bool,
}

/// Gram matrix `mean(h h^T)` and objective vectors `mean(psi_c)` for `k`
/// objectives, accumulated per sample block in parallel and reduced in block
/// order.
fn moments<F>(n: usize, p: usize, k: usize, fill: F) -> (Vec<f64>, Vec<Vec<f64>>)
where
    F: Fn(usize, &mut [f64], &mut [f64], &mut Workspace) + Sync,
{
    let blocks: Vec<(Vec<f64>, Vec<f64>)> = (0..n.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut g = vec![0.0; p * p];
            let mut s = vec![0.0; k * p];
            let mut h = vec![0.0; p];
            let mut psi = vec![0.0; k * p];
            let mut ws = Workspace::default();
            for i in b * BLOCK..((b + 1) * BLOCK).min(n) {
                fill(i, &mut h, &mut psi, &mut ws);
                for r in 0..p {
                    for c in 0..=r {
                        g[r * p + c] += h[r] * h[c];
                    }
                }
                for (a, v) in s.iter_mut().zip(&psi) {
                    *a += v;
                }
            }
            (g, s)
        })
        .collect();
    let mut g = vec![0.0; p * p];
    let mut s = vec![0.0; k * p];
    for (bg, bs) in blocks {
        for (a, v) in g.iter_mut().zip(&bg) {
            *a += v;
        }
        for (a, v) in s.iter_mut().zip(&bs) {
            *a += v;
        }
    }
    let nf = n as f64;
    for r in 0..p {
        for c in 0..=r {
            let v = g[r * p + c] / nf;
            g[r * p + c] = v;
            g[c * p + r] = v;
        }
    }
    let b = s.chunks(p).map(|c| c.iter().map(|v| v / nf).collect()).collect();
    (g, b)
}

fn factor(g: &[f64], p: usize) -> Result<(Matrix<f64>, bool)> {
    let m = Matrix::from_row_major(p, p, g.to_vec())?;
    match m.cholesky() {
        Ok(l) => Ok((l, false)),
        Err(_) => {
            let scale = (0..p).map(|i| g[i * p + i]).fold(0.0, f64::max).max(1.0);
            let r = &m + &Matrix::identity(p).scale(RIDGE * scale);
            Ok((r.cholesky()?, true))
        }
    }
}

fn forward(l: &Matrix<f64>, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; b.len()];
    for i in 0..b.len() {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    y
}

fn rayleigh(l: &Matrix<f64>, b: &[f64], prefixes: &[usize], ridge: bool) -> (RayleighSup, Vec<f64>) {
    let z = forward(l, b);
    let mut by_degree = Vec::with_capacity(prefixes.len());
    let mut acc = 0.0;
    let mut done = 0;
    for &p in prefixes {
        for v in &z[done..p] {
            acc += v * v;
        }
        done = p;
        by_degree.push(acc);
    }
    let c = cholesky_solve(l, b);
    let sup = acc;
    let coefficients = if sup > 0.0 { c.iter().map(|v| v / sup.sqrt()).collect() } else { vec![0.0; c.len()] };
    (RayleighSup { sup, se: 0.0, by_degree, coefficients, ridge }, c)
}

#[derive(Debug, Clone, Serialize)]
pub struct SupReport {
    pub sup_estimate: f64,
    pub sup_se: f64,
    /// Supremum over the degree-`k` basis, `k = 1..=max_degree`.
    pub sup_by_degree: Vec<f64>,
    pub coefficients: Vec<f64>,
    /// `E[E[X|Y]^2]` by cross-fitted regression.
    pub direct_estimate: f64,
    pub direct_se: f64,
    /// `direct - sup`.
    pub gap: f64,
    pub gap_se: f64,
    pub ridge: bool,
    pub n: usize,
}

impl SupReport {
    /// The finite-basis value does not exceed the regression value.
    pub fn lower_bound_holds(&self, k: f64) -> bool {
        self.gap >= -k * self.gap_se
    }
}

/// Pairs `(X, sqrt(t) X + sqrt(1 - t) Z)` with `X` drawn from `base`.
pub fn channel_pairs(base: &DensityModel1D<f64>, t: f64, spec: &MCSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!("channel parameter t = {t} not in [0, 1]")));
    }
    let (a, b) = (t.sqrt(), (1.0 - t).sqrt());
    let xy = spec.draw(2, |r, row: &mut [f64]| {
        let x = base.sample_f64(r);
        let z: f64 = StandardNormal.sample(r);
        row[0] = x;
        row[1] = a * x + b * z;
    })?;
    Ok(xy.chunks(2).map(|r| (r[0], r[1])).unzip())
}

/// `sup over phi in H(Y) of (E[X phi(Y)])^2` over the span of `basis`, with
/// `X` centered empirically, alongside the regression estimate of
/// `E[E[X|Y]^2]`.
pub fn poly_sup(
    x: &[f64],
    y: &[f64],
    basis: &TestFunctionBasis,
    reg: &ConditionalRegressor,
) -> Result<SupReport> {
    let d = basis.dim;
    let n = x.len();
    if y.len() != n * d {
        return Err(Error::InvalidParameter("x and y sample counts differ".into()));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let xc: Vec<f64> = x.iter().map(|v| v - mx).collect();
    let p = basis.len();
    let (g, b) = moments(n, p, 1, |i, h, psi, ws| {
        basis.eval_with(&y[i * d..(i + 1) * d], h, None, ws);
        for (o, v) in psi.iter_mut().zip(h.iter()) {
            *o = xc[i] * v;
        }
    });
    let (l, ridge) = factor(&g, p)?;
    let prefixes: Vec<usize> = (1..=basis.max_degree).map(|k| basis.prefix_len(k)).collect();
    let (mut sup, c) = rayleigh(&l, &b[0], &prefixes, ridge);

    let m = cross_fit(y, d, &xc, 1, reg)?;
    let mut h = vec![0.0; p];
    let mut ws = Workspace::default();
    let mut u = Vec::with_capacity(n);
    let mut direct = Vec::with_capacity(n);
    let mut gap = Vec::with_capacity(n);
    for i in 0..n {
        basis.eval_with(&y[i * d..(i + 1) * d], &mut h, None, &mut ws);
        let ch: f64 = c.iter().zip(&h).map(|(a, b)| a * b).sum();
        let ui = 2.0 * ch * xc[i] - ch * ch;
        let di = xc[i] * m[i];
        u.push(ui);
        direct.push(di);
        gap.push(di - ui);
    }
    sup.se = scalar_mean(&u).1;
    let (dv, dse) = scalar_mean(&direct);
    let gse = scalar_mean(&gap).1;
    Ok(SupReport {
        sup_estimate: sup.sup,
        sup_se: sup.se,
        sup_by_degree: sup.by_degree,
        coefficients: sup.coefficients,
        direct_estimate: dv,
        direct_se: dse,
        gap: dv - sup.sup,
        gap_se: gse,
        ridge,
        n,
    })
}

/// Draws of `W_n` for i.i.d. copies of a product of independent components.
/// Row `i` holds the `n x d` summands, summand-major.
struct SumDraws {
    n_summands: usize,
    d: usize,
    x: Vec<f64>,
    w: Vec<f64>,
}

fn draw_sums(components: &[DensityModel1D<f64>], n_summands: usize, spec: &MCSpec) -> Result<SumDraws> {
    let d = components.len();
    let x: Vec<f64> = spec.draw(n_summands * d, |r, row: &mut [f64]| {
        for s in row.chunks_mut(d) {
            for (v, c) in s.iter_mut().zip(components) {
                *v = c.sample_f64(r);
            }
        }
    })?;
    let scale = 1.0 / (n_summands as f64).sqrt();
    let mut w = Vec::with_capacity(spec.n_samples * d);
    for row in x.chunks(n_summands * d) {
        for j in 0..d {
            w.push(row.iter().skip(j).step_by(d).sum::<f64>() * scale);
        }
    }
    Ok(SumDraws { n_summands, d, x, w })
}

fn check_components(components: &[DensityModel1D<f64>], n: usize) -> Result<()> {
    if components.is_empty() || components.len() > 2 {
        return Err(Error::InvalidParameter("dimension must be 1 or 2".into()));
    }
    if n == 0 || n > crate::bounds::MAX_SUMMANDS {
        return Err(Error::InvalidParameter(format!("n = {n} summands out of range")));
    }
    for c in components {
        if c.mean().abs() > 1e-9 || (c.variance() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("component `{}` is not standardized", c.name())));
        }
    }
    Ok(())
}

/// Per-coordinate suprema of `(E[d_j phi(W) - W^j phi(W)])^2`.
#[derive(Debug, Clone, Serialize)]
pub struct SteinSup {
    pub per_coordinate: Vec<RayleighSup>,
    pub total: f64,
    pub total_se: f64,
    pub max_degree: usize,
    pub n_summands: usize,
    pub n: usize,
    pub seed: u64,
    /// Expected value of `total` when the summands are Gaussian: the plug-in
    /// supremum is a sum of squared sample means and overfits by their
    /// variance.
    pub null_bias: f64,
    /// Standard deviation of `total` under the same null.
    pub null_sd: f64,
}

impl SteinSup {
    /// `total` is consistent with zero relative Fisher information.
    pub fn consistent_with_zero(&self, k: f64) -> bool {
        self.total <= self.null_bias + k * self.null_sd.max(self.total_se)
    }
}

fn stein_sup(draws: &SumDraws, max_degree: usize, seed: u64) -> Result<SteinSup> {
    let d = draws.d;
    let n = draws.w.len() / d;
    let w = &draws.w;
    let basis = TestFunctionBasis::fit(w, d, max_degree)?;
    let p = basis.len();
    let (g, b) = moments(n, p, d, |i, h, psi, ws| {
        let wi = &w[i * d..(i + 1) * d];
        let mut grad = vec![0.0; p * d];
        basis.eval_with(wi, h, Some(&mut grad), ws);
        for j in 0..d {
            for f in 0..p {
                psi[j * p + f] = grad[f * d + j] - wi[j] * h[f];
            }
        }
    });
    let (l, ridge) = factor(&g, p)?;
    let prefixes: Vec<usize> = (1..=max_degree).map(|k| basis.prefix_len(k)).collect();
    let fits: Vec<(RayleighSup, Vec<f64>)> = b.iter().map(|bj| rayleigh(&l, bj, &prefixes, ridge)).collect();
    let mut per = vec![Moments::default(); d];
    let mut total = Moments::default();
    let mut h = vec![0.0; p];
    let mut grad = vec![0.0; p * d];
    let mut ws = Workspace::default();
    // Whitened summands L^{-1} psi, for the null moments.
    let mut zs = vec![Moments::default(); d * p];
    let mut psi = vec![0.0; p];
    for i in 0..n {
        let wi = &w[i * d..(i + 1) * d];
        basis.eval_with(wi, &mut h, Some(&mut grad), &mut ws);
        let mut ti = 0.0;
        for (j, (_, c)) in fits.iter().enumerate() {
            for f in 0..p {
                psi[f] = grad[f * d + j] - wi[j] * h[f];
            }
            let ch: f64 = c.iter().zip(&h).map(|(a, b)| a * b).sum();
            let cpsi: f64 = c.iter().zip(&psi).map(|(a, b)| a * b).sum();
            let u = 2.0 * cpsi - ch * ch;
            per[j].push(u);
            ti += u;
            for (m, z) in zs[j * p..(j + 1) * p].iter_mut().zip(forward(&l, &psi)) {
                m.push(z);
            }
        }
        total.push(ti);
    }
    let vars: Vec<f64> = zs.iter().map(|m| m.variance() / n as f64).collect();
    let null_bias = vars.iter().sum();
    let null_sd = (2.0 * vars.iter().map(|v| v * v).sum::<f64>()).sqrt();
    let mut per_coordinate = Vec::with_capacity(d);
    for ((mut r, _), m) in fits.into_iter().zip(&per) {
        r.se = m.std_error();
        per_coordinate.push(r);
    }
    let total_value = per_coordinate.iter().map(|r| r.sup).sum();
    Ok(SteinSup {
        per_coordinate,
        total: total_value,
        total_se: total.std_error(),
        max_degree,
        n_summands: draws.n_summands,
        n,
        seed,
        null_bias,
        null_sd,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SteinRepReport {
    pub model: String,
    /// Finite-basis supremum of `(E[phi'(W) - W phi(W)])^2`.
    pub sup: SteinSup,
    /// `n^{-1} E[(E[sum_i (1 - tau_i(X_i)) rho_{i+1}(X_{i+1}) | W])^2]`,
    /// when the summands have regular scores and `n >= 2`.
    pub conditional: Option<f64>,
    pub conditional_se: Option<f64>,
    /// Why the conditional form was not evaluated.
    pub conditional_skipped: Option<String>,
}

impl SteinRepReport {
    /// The finite-basis value does not exceed the conditional form.
    pub fn lower_bound_holds(&self, k: f64) -> bool {
        match (self.conditional, self.conditional_se) {
            (Some(c), Some(se)) => {
                let s = &self.sup;
                s.total <= c + k * (se * se + s.total_se * s.total_se).sqrt()
            }
            _ => true,
        }
    }
}

/// Relative Fisher information of `W_n` for i.i.d. univariate summands, by
/// the finite-basis supremum and by the conditional-expectation form.
pub fn stein_rep_fisher_1d(
    base: &DensityModel1D<f64>,
    n_summands: usize,
    max_degree: usize,
    spec: &MCSpec,
) -> Result<SteinRepReport> {
    let components = [base.clone()];
    check_components(&components, n_summands)?;
    let draws = draw_sums(&components, n_summands, spec)?;
    let sup = stein_sup(&draws, max_degree, spec.seed)?;
    let reg = representation_regressor();
    let (conditional, conditional_se, conditional_skipped) = if n_summands < 2 {
        (None, None, Some("needs at least two summands".to_string()))
    } else if !base.regular_score() {
        (None, None, Some(format!("`{}` has density jumps; its score is not regular", base.name())))
    } else {
        let (v, se) = conditional_form(base, &draws, &reg)?;
        (Some(v), Some(se), None)
    };
    Ok(SteinRepReport { model: base.name().to_string(), sup, conditional, conditional_se, conditional_skipped })
}

fn conditional_form(base: &DensityModel1D<f64>, draws: &SumDraws, reg: &ConditionalRegressor) -> Result<(f64, f64)> {
    let n = draws.n_summands;
    let kernel = SteinKernel1D::new(base)?;
    let mut target = Vec::with_capacity(draws.w.len());
    for row in draws.x.chunks(n) {
        let mut s = 0.0;
        for i in 0..n {
            let tau = kernel.eval(row[i])?;
            let rho = base.score(row[(i + 1) % n])?;
            s += (1.0 - tau) * rho;
        }
        target.push(s);
    }
    let m = cross_fit(&draws.w, 1, &target, 1, reg)?;
    let terms: Vec<f64> = target.iter().zip(&m).map(|(a, b)| a * b / n as f64).collect();
    Ok(scalar_mean(&terms))
}

/// `J_st(W_n)` for i.i.d. copies of a product law in `d <= 2` coordinates as
/// the sum of per-coordinate suprema.
pub fn stein_rep_fisher_multi(
    model: &ProductModel<f64>,
    n_summands: usize,
    max_degree: usize,
    spec: &MCSpec,
) -> Result<SteinSup> {
    if model.linear_map().is_some() {
        return Err(Error::Capability("product summands with a linear map are not supported".into()));
    }
    let components = model.components();
    check_components(components, n_summands)?;
    let draws = draw_sums(components, n_summands, spec)?;
    stein_sup(&draws, max_degree, spec.seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_recursion() {
        let (mut v, mut d) = (vec![], vec![]);
        hermite_table(1.5, 4, &mut v, &mut d);
        let x: f64 = 1.5;
        assert!((v[2] - (x * x - 1.0)).abs() < 1e-14);
        assert!((v[3] - (x.powi(3) - 3.0 * x)).abs() < 1e-14);
        assert!((v[4] - (x.powi(4) - 6.0 * x * x + 3.0)).abs() < 1e-13);
        assert!((d[4] - 4.0 * v[3]).abs() < 1e-13);
    }

    #[test]
    fn tensor_basis_is_nested() {
        let a = multi_indices(2, 3);
        assert_eq!(a.len(), 15);
        let y: Vec<f64> = (0..400).map(|i| ((i * 37) % 101) as f64 / 50.0 - 1.0).collect();
        let b = TestFunctionBasis::fit(&y, 2, 3).unwrap();
        assert_eq!(b.prefix_len(1), 3);
        assert_eq!(b.prefix_len(2), 8);
        assert_eq!(b.prefix_len(3), 15);
    }

    #[test]
    fn basis_membership_is_exact_on_the_fitting_sample() {
        let y: Vec<f64> = (0..1000).map(|i| ((i as f64) * 0.618).fract() * 2.0 - 1.0).collect();
        let b = TestFunctionBasis::fit(&y, 1, 5).unwrap();
        for (m, _, s) in b.membership(&y) {
            assert!(m.abs() < 1e-12);
            assert!((s - 1.0).abs() < 1e-9);
        }
    }
}
