//! Monte Carlo estimators of the score of Gaussian-channel outputs and of
//! weighted sums, built from conditional expectations of Stein-kernel
//! expressions, and the information identities they imply.
//!
//! Sampling and regression run in `f64`.

use std::sync::OnceLock;

use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::models::{model_by_name, DensityModel1D, Model, MultiModel};
use crate::numerics::grid::{convolve_densities, GridDensity, GridSpec};
use crate::numerics::mc::{EstimatorReport, MCSpec, Moments};
use crate::numerics::regress::{regress_conditional, Bandwidth, ConditionalRegressor, FittedRegression};
use crate::stein_kernel::{stein_matrix, SteinMatrix};

/// Grid used for the convolved densities that serve as score oracles. The
/// wider span keeps exponential tails of channel outputs on the grid.
pub const ORACLE_GRID: GridSpec<f64> = GridSpec { points: 4096, sigma_span: 16.0 };

/// A law together with its Stein matrix and covariance.
#[derive(Debug, Clone)]
pub struct Law {
    model: MultiModel<f64>,
    kernel: SteinMatrix<f64>,
    cov: Matrix<f64>,
    precision: Matrix<f64>,
}

impl Law {
    pub fn new(model: MultiModel<f64>) -> Result<Self> {
        let kernel = stein_matrix(&model)?;
        let cov = model.covariance();
        let precision = cov.inverse()?;
        Ok(Self { model, kernel, cov, precision })
    }

    pub fn univariate(m: &DensityModel1D<f64>) -> Result<Self> {
        Self::new(MultiModel::Univariate(m.clone()))
    }

    /// Registered univariate law by name.
    pub fn by_name(name: &str) -> Result<Self> {
        Self::univariate(&model_by_name(name)?)
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn name(&self) -> String {
        self.model.name()
    }

    pub fn model(&self) -> &MultiModel<f64> {
        &self.model
    }

    pub fn cov(&self) -> &Matrix<f64> {
        &self.cov
    }

    pub fn precision(&self) -> &Matrix<f64> {
        &self.precision
    }

    pub fn is_gaussian(&self) -> bool {
        self.model.is_gaussian()
    }

    pub fn regular_score(&self) -> bool {
        self.model.regular_score()
    }

    pub fn tau(&self, x: &[f64]) -> Result<Matrix<f64>> {
        self.kernel.eval(x)
    }

    pub fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.model.score_at(x)
    }

    fn sample_into(&self, rng: &mut crate::numerics::mc::McRng, out: &mut [f64]) {
        self.model.sample_into(rng, out)
    }

    /// The univariate model, for density oracles.
    pub fn univariate_model(&self) -> Option<&DensityModel1D<f64>> {
        match &self.model {
            MultiModel::Univariate(m) => Some(m),
            _ => None,
        }
    }

    /// Whether `Id - gamma^{-1} tau` vanishes identically.
    fn kernel_matches(&self, gamma: &Matrix<f64>) -> bool {
        self.is_gaussian() && (&self.cov - gamma).max_abs() < 1e-12
    }
}

fn check_t(t: f64) -> Result<()> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::Domain { coordinate: 0, value: t });
    }
    Ok(())
}

fn irregular(law: &Law) -> Error {
    Error::Capability(format!(
        "score of {} is irregular at its support boundary; use a smoothed version such as smoothed:{}:0.9",
        law.name(),
        law.name()
    ))
}

/// `X_t = sqrt(t) X + sqrt(1 - t) Z` with `Z ~ N(0, C)`, `C = Cov(X)`.
#[derive(Debug)]
pub struct ChannelPoint {
    t: f64,
    base: Law,
    noise_chol: Matrix<f64>,
    density: OnceLock<Result<GridDensity<f64>>>,
}

/// Draws of a channel point, row-major with `d` columns each.
#[derive(Debug, Clone)]
pub struct ChannelSamples {
    pub n: usize,
    pub d: usize,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub xt: Vec<f64>,
}

impl ChannelPoint {
    pub fn new(base: Law, t: f64) -> Result<Self> {
        check_t(t)?;
        let noise_chol = base.cov.cholesky()?;
        Ok(Self { t, base, noise_chol, density: OnceLock::new() })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn base(&self) -> &Law {
        &self.base
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// Density of `X_t` by convolution (one-dimensional bases only).
    pub fn density(&self) -> Result<&GridDensity<f64>> {
        self.density
            .get_or_init(|| {
                let m = self
                    .base
                    .univariate_model()
                    .ok_or_else(|| Error::Capability("channel density needs a univariate base".into()))?;
                let sd = self.base.cov[(0, 0)].sqrt();
                convolve_densities(
                    m,
                    &DensityModel1D::gaussian(),
                    self.t.sqrt(),
                    (1.0 - self.t).sqrt() * sd,
                    &ORACLE_GRID,
                )
            })
            .as_ref()
            .map_err(Clone::clone)
    }

    pub fn sample(&self, spec: &MCSpec) -> Result<ChannelSamples> {
        let d = self.dim();
        let rows: Vec<f64> = spec.draw(2 * d, |r, row| {
            self.base.sample_into(r, &mut row[..d]);
            for v in row[d..].iter_mut() {
                *v = StandardNormal.sample(r);
            }
        })?;
        let n = spec.n_samples;
        let (a, b) = (self.t.sqrt(), (1.0 - self.t).sqrt());
        let mut x = Vec::with_capacity(n * d);
        let mut z = Vec::with_capacity(n * d);
        let mut xt = Vec::with_capacity(n * d);
        for row in rows.chunks(2 * d) {
            let zi = self.noise_chol.mul_vec(&row[d..]);
            for j in 0..d {
                x.push(row[j]);
                z.push(zi[j]);
                xt.push(a * row[j] + b * zi[j]);
            }
        }
        Ok(ChannelSamples { n, d, x, z, xt })
    }

    /// `V = (Id - C^{-1} tau(X)) C^{-1} Z` per sample.
    fn kernel_targets(&self, s: &ChannelSamples) -> Result<Vec<f64>> {
        let d = s.d;
        let p = &self.base.precision;
        let mut out = Vec::with_capacity(s.n * d);
        for i in 0..s.n {
            let x = &s.x[i * d..(i + 1) * d];
            let cz = p.mul_vec(&s.z[i * d..(i + 1) * d]);
            if self.base.is_gaussian() {
                out.extend(std::iter::repeat_n(0.0, d));
                continue;
            }
            let m = &Matrix::identity(d) - &(p * &self.base.tau(x)?);
            out.extend(m.mul_vec(&cz));
        }
        Ok(out)
    }
}

/// `W_t = sqrt(t) X + sqrt(1 - t) Y` for independent centered `X`, `Y`.
#[derive(Debug)]
pub struct MixturePoint {
    t: f64,
    x: Law,
    y: Law,
    gamma: Matrix<f64>,
}

impl MixturePoint {
    pub fn new(x: Law, y: Law, t: f64) -> Result<Self> {
        check_t(t)?;
        if x.dim() != y.dim() {
            return Err(Error::InvalidParameter("summands must have the same dimension".into()));
        }
        let gamma = &x.cov.scale(t) + &y.cov.scale(1.0 - t);
        Ok(Self { t, x, y, gamma })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// `Gamma_t = t Cov(X) + (1 - t) Cov(Y)`.
    pub fn gamma(&self) -> &Matrix<f64> {
        &self.gamma
    }

    /// Density of `W_t` by convolution (one-dimensional summands only).
    pub fn density(&self) -> Result<GridDensity<f64>> {
        match (self.x.univariate_model(), self.y.univariate_model()) {
            (Some(x), Some(y)) => convolve_densities(x, y, self.t.sqrt(), (1.0 - self.t).sqrt(), &ORACLE_GRID),
            _ => Err(Error::Capability("sum density needs univariate summands".into())),
        }
    }
}

/// Local-linear Gaussian-kernel regression with the Silverman bandwidth:
/// unlike Nadaraya-Watson it has no design-density bias term, which would
/// otherwise shift the second moments of conditional means by `O(h^2)`.
pub fn representation_regressor() -> ConditionalRegressor {
    ConditionalRegressor::default().with_method(crate::numerics::regress::RegressionMethod::LocalLinear)
}

/// Score estimate `rho(w) = L w + K m(w)` where `m` is a fitted conditional
/// expectation. `correction(w) = rho(w) + Gamma^{-1} w` is the part that
/// vanishes for Gaussian laws.
#[derive(Debug, Clone)]
pub struct FittedScore {
    fit: FittedRegression,
    lin: Matrix<f64>,
    gain: Matrix<f64>,
    gamma_inv: Matrix<f64>,
    method: &'static str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreValue {
    pub score: Vec<f64>,
    pub correction: Vec<f64>,
    /// Regression variance of each coordinate.
    pub variance: Vec<f64>,
    pub clamped: bool,
    pub extrapolated: bool,
}

impl FittedScore {
    pub fn method(&self) -> &'static str {
        self.method
    }

    pub fn dim(&self) -> usize {
        self.lin.rows()
    }

    pub fn regression(&self) -> &FittedRegression {
        &self.fit
    }

    pub fn eval(&self, w: &[f64]) -> ScoreValue {
        let e = self.fit.eval(w);
        let lw = self.lin.mul_vec(w);
        let km = self.gain.mul_vec(&e.values);
        let score: Vec<f64> = lw.iter().zip(&km).map(|(a, b)| a + b).collect();
        let gw = self.gamma_inv.mul_vec(w);
        let correction = score.iter().zip(&gw).map(|(a, b)| a + b).collect();
        let d = self.dim();
        let variance = (0..d)
            .map(|j| (0..d).map(|k| self.gain[(j, k)].powi(2) * e.variances[k]).sum())
            .collect();
        ScoreValue { score, correction, variance, clamped: e.clamped, extrapolated: e.extrapolated }
    }

    /// One-dimensional score at `w`.
    pub fn score1(&self, w: f64) -> f64 {
        self.eval(&[w]).score[0]
    }

    /// Largest `|correction| / sd` over `points`, treating a zero standard
    /// deviation with a zero correction as 0.
    pub fn max_standardized_correction(&self, points: &[Vec<f64>]) -> f64 {
        let mut worst: f64 = 0.0;
        for p in points {
            let v = self.eval(p);
            for (c, var) in v.correction.iter().zip(&v.variance) {
                let r = if c.abs() == 0.0 { 0.0 } else { c.abs() / var.sqrt() };
                worst = worst.max(r);
            }
        }
        worst
    }

    /// `(lower, upper)` of the regression box per coordinate.
    pub fn domain(&self) -> Vec<(f64, f64)> {
        self.fit.domain()
    }
}

/// Fits `E[target | cond]` on all samples.
fn fit(cond: &[f64], d: usize, target: &[f64], k: usize, reg: &ConditionalRegressor) -> Result<FittedRegression> {
    regress_conditional(cond, d, target, k, reg)
}

/// Tail cut of the evaluation box used for cross-fitted moments. Clamping
/// at the default 1% quantiles biases second moments of nearly linear
/// conditional means by the tail mass it flattens.
pub const CROSS_FIT_TAIL: f64 = 0.0;

/// Bandwidth multiplier for cross-fitted moments. Smoothing bias of
/// `E[m(W) m_h(W)]` is `O(h^2)` while the regression noise averages out
/// across folds, so moments are estimated with undersmoothed fits.
pub const CROSS_FIT_BANDWIDTH: f64 = 0.25;

/// Cross-fitted predictions: each half of the sample is evaluated with the
/// regression fitted on the other half. Returns `n x k` values.
pub(crate) fn cross_fit(cond: &[f64], d: usize, target: &[f64], k: usize, reg: &ConditionalRegressor) -> Result<Vec<f64>> {
    let mut reg = reg.with_tail(reg.tail.min(CROSS_FIT_TAIL));
    if reg.bandwidth == Bandwidth::Silverman {
        reg.bandwidth = Bandwidth::SilvermanScaled(CROSS_FIT_BANDWIDTH);
    }
    let reg = &reg;
    let n = cond.len() / d;
    let half = n / 2;
    let mut out = vec![0.0; n * k];
    for (fit_rows, eval_rows) in [(0..half, half..n), (half..n, 0..half)] {
        let f = fit(
            &cond[fit_rows.start * d..fit_rows.end * d],
            d,
            &target[fit_rows.start * k..fit_rows.end * k],
            k,
            reg,
        )?;
        for i in eval_rows {
            let e = f.eval(&cond[i * d..(i + 1) * d]);
            out[i * k..(i + 1) * k].copy_from_slice(&e.values);
        }
    }
    Ok(out)
}

/// Mean and standard error of per-sample `k x k` matrices.
fn matrix_mean(terms: &[f64], k: usize) -> (Matrix<f64>, Matrix<f64>) {
    let mut m = vec![Moments::default(); k * k];
    for row in terms.chunks(k * k) {
        for (acc, &v) in m.iter_mut().zip(row) {
            acc.push(v);
        }
    }
    let mean = Matrix::from_row_major(k, k, m.iter().map(Moments::mean).collect()).expect("square");
    let se = Matrix::from_row_major(k, k, m.iter().map(Moments::std_error).collect()).expect("square");
    (mean, se)
}

pub(crate) fn scalar_mean(terms: &[f64]) -> (f64, f64) {
    let mut m = Moments::default();
    for &v in terms {
        m.push(v);
    }
    (m.mean(), m.std_error())
}

/// `rho_t(w) + C^{-1} w = -(t / sqrt(1 - t)) E[(Id - C^{-1} tau(X)) C^{-1} Z | X_t = w]`.
pub fn gaussian_smoothing_score(point: &ChannelPoint, reg: &ConditionalRegressor, spec: &MCSpec) -> Result<FittedScore> {
    let s = point.sample(spec)?;
    let v = point.kernel_targets(&s)?;
    let d = s.d;
    let t = point.t;
    let f = fit(&s.xt, d, &v, d, reg)?;
    let p = point.base.precision.clone();
    Ok(FittedScore {
        fit: f,
        lin: p.scale(-1.0),
        gain: Matrix::identity(d).scale(-t / (1.0 - t).sqrt()),
        gamma_inv: p,
        method: "gaussian-smoothing",
    })
}

/// Two-summand representation: `rho_W(w) = s(w) - Gamma^{-1} w` with
/// `s(w) = E[(t/sqrt(1-t)) (Id - Gamma^{-1} tau_X(X)) rho_Y(Y)
///   + ((1-t)/sqrt(t)) (Id - Gamma^{-1} tau_Y(Y)) rho_X(X) | W_t = w]`.
pub fn score_of_sum_representation(
    point: &MixturePoint,
    reg: &ConditionalRegressor,
    spec: &MCSpec,
) -> Result<FittedScore> {
    let (xl, yl) = (&point.x, &point.y);
    let d = xl.dim();
    let t = point.t;
    let gamma_inv = point.gamma.inverse()?;
    let use_y = !xl.kernel_matches(&point.gamma);
    let use_x = !yl.kernel_matches(&point.gamma);
    if use_y && !yl.regular_score() {
        return Err(irregular(yl));
    }
    if use_x && !xl.regular_score() {
        return Err(irregular(xl));
    }
    let rows: Vec<f64> = spec.draw(2 * d, |r, row| {
        xl.sample_into(r, &mut row[..d]);
        yl.sample_into(r, &mut row[d..]);
    })?;
    let (a, b) = (t.sqrt(), (1.0 - t).sqrt());
    let id = Matrix::identity(d);
    let mut w = Vec::with_capacity(spec.n_samples * d);
    let mut target = Vec::with_capacity(spec.n_samples * d);
    for row in rows.chunks(2 * d) {
        let (x, y) = (&row[..d], &row[d..]);
        let mut s = vec![0.0; d];
        if use_y {
            let m = &id - &(&gamma_inv * &xl.tau(x)?);
            let v = m.mul_vec(&yl.score(y)?);
            for j in 0..d {
                s[j] += t / b * v[j];
            }
        }
        if use_x {
            let m = &id - &(&gamma_inv * &yl.tau(y)?);
            let v = m.mul_vec(&xl.score(x)?);
            for j in 0..d {
                s[j] += (1.0 - t) / a * v[j];
            }
        }
        for j in 0..d {
            w.push(a * x[j] + b * y[j]);
        }
        target.extend(s);
    }
    let f = fit(&w, d, &target, d, reg)?;
    Ok(FittedScore { fit: f, lin: gamma_inv.scale(-1.0), gain: id, gamma_inv, method: "two-summand" })
}

/// Cyclic `n`-summand representation with `W = sum_i sqrt(t_i) X_i`:
/// `s(w) = sum_i (t_i / sqrt(t_{i+1})) E[(Id - Gamma^{-1} tau_i(X_i)) rho_{i+1}(X_{i+1}) | W = w]`
/// with `X_{n+1} = X_1`.
pub fn score_of_sum_n(
    laws: &[Law],
    weights: &[f64],
    reg: &ConditionalRegressor,
    spec: &MCSpec,
) -> Result<FittedScore> {
    let n = laws.len();
    if n < 2 || weights.len() != n {
        return Err(Error::InvalidParameter("need at least two laws with one weight each".into()));
    }
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|&w| !(w > 0.0)) || (total - 1.0).abs() > 1e-12 {
        return Err(Error::Domain { coordinate: 0, value: total });
    }
    let d = laws[0].dim();
    if laws.iter().any(|l| l.dim() != d) {
        return Err(Error::InvalidParameter("summands must have the same dimension".into()));
    }
    let mut gamma = Matrix::zeros(d, d);
    for (l, &ti) in laws.iter().zip(weights) {
        gamma = &gamma + &l.cov.scale(ti);
    }
    let gamma_inv = gamma.inverse()?;
    let active: Vec<bool> = laws.iter().map(|l| !l.kernel_matches(&gamma)).collect();
    for i in 0..n {
        let next = &laws[(i + 1) % n];
        if active[i] && !next.regular_score() {
            return Err(irregular(next));
        }
    }
    let rows: Vec<f64> = spec.draw(n * d, |r, row| {
        for (i, l) in laws.iter().enumerate() {
            l.sample_into(r, &mut row[i * d..(i + 1) * d]);
        }
    })?;
    let id = Matrix::identity(d);
    let sq: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let mut w = Vec::with_capacity(spec.n_samples * d);
    let mut target = Vec::with_capacity(spec.n_samples * d);
    for row in rows.chunks(n * d) {
        let mut s = vec![0.0; d];
        let mut wi = vec![0.0; d];
        for i in 0..n {
            let xi = &row[i * d..(i + 1) * d];
            for j in 0..d {
                wi[j] += sq[i] * xi[j];
            }
            if !active[i] {
                continue;
            }
            let k = (i + 1) % n;
            let xk = &row[k * d..(k + 1) * d];
            let m = &id - &(&gamma_inv * &laws[i].tau(xi)?);
            let v = m.mul_vec(&laws[k].score(xk)?);
            let c = weights[i] / sq[k];
            for j in 0..d {
                s[j] += c * v[j];
            }
        }
        w.extend(wi);
        target.extend(s);
    }
    let f = fit(&w, d, &target, d, reg)?;
    Ok(FittedScore { fit: f, lin: gamma_inv.scale(-1.0), gain: id, gamma_inv, method: "cyclic-sum" })
}

/// Density of `sum_i sqrt(t_i) X_i` for univariate laws, by repeated convolution.
pub fn weighted_sum_density(laws: &[Law], weights: &[f64]) -> Result<GridDensity<f64>> {
    let models = laws
        .iter()
        .map(|l| l.univariate_model().ok_or_else(|| Error::Capability("sum density needs univariate summands".into())))
        .collect::<Result<Vec<_>>>()?;
    if models.len() < 2 || weights.len() != models.len() {
        return Err(Error::InvalidParameter("need at least two summands".into()));
    }
    let mut g = convolve_densities(models[0], models[1], weights[0].sqrt(), weights[1].sqrt(), &ORACLE_GRID)?;
    for (m, w) in models.iter().zip(weights).skip(2) {
        g = convolve_densities(&g, *m, 1.0, w.sqrt(), &ORACLE_GRID)?;
    }
    Ok(g)
}

/// Conditional-mean score `rho_t(w) = -(1/(1-t)) C^{-1} (w - sqrt(t) E[X | X_t = w])`
/// and the Fisher information it implies.
#[derive(Debug, Clone)]
pub struct MmseScoreReport {
    pub score: FittedScore,
    /// `J(X_t) = C^{-1}/(1-t) - t/(1-t)^2 C^{-1} MMSE C^{-1}`.
    pub j: EstimatorReport,
    pub j_st: EstimatorReport,
    pub mmse: EstimatorReport,
}

/// Per-sample terms of the cross-fitted MMSE estimate:
/// `X X^T - sym(X m(X_t)^T)`, `m` fitted on the other half.
fn mmse_terms(s: &ChannelSamples, reg: &ConditionalRegressor) -> Result<Vec<f64>> {
    let d = s.d;
    let m = cross_fit(&s.xt, d, &s.x, d, reg)?;
    let mut terms = Vec::with_capacity(s.n * d * d);
    for i in 0..s.n {
        let x = &s.x[i * d..(i + 1) * d];
        let mi = &m[i * d..(i + 1) * d];
        for r in 0..d {
            for c in 0..d {
                terms.push(x[r] * x[c] - 0.5 * (x[r] * mi[c] + mi[r] * x[c]));
            }
        }
    }
    Ok(terms)
}

/// `E[(X - E[X|X_t])(X - E[X|X_t])^T]`.
pub fn mmse(point: &ChannelPoint, reg: &ConditionalRegressor, spec: &MCSpec) -> Result<EstimatorReport> {
    let s = point.sample(spec)?;
    let terms = mmse_terms(&s, reg)?;
    let (mean, se) = matrix_mean(&terms, s.d);
    Ok(EstimatorReport::matrix(&mean, &se, s.n, "mmse-cross-fit", Some(spec.seed)))
}

/// `J_st(X_t) = (t/(1-t)) tr(Id - MMSE C^{-1} / (1-t))` per sample.
fn jst_terms_from_mmse(point: &ChannelPoint, mmse_terms: &[f64], d: usize) -> Vec<f64> {
    jst_terms_from_mmse_with(point.t, &point.base.precision, mmse_terms, d)
}

fn jst_terms_from_mmse_with(t: f64, p: &Matrix<f64>, mmse_terms: &[f64], d: usize) -> Vec<f64> {
    mmse_terms
        .chunks(d * d)
        .map(|m| {
            let m = Matrix::from_row_major(d, d, m.to_vec()).expect("square");
            let tr = (&m * p).trace();
            t / (1.0 - t) * (d as f64 - tr / (1.0 - t))
        })
        .collect()
}

/// `J_st(sqrt(t) X + sqrt(1-t) Z)` from the channel MMSE, for row-major
/// draws `x` of a law with precision `p` and `Z ~ N(0, C)`, `C = p^{-1}`.
/// The noise is drawn from `spec`.
pub fn mmse_channel_jst(
    x: Vec<f64>,
    d: usize,
    t: f64,
    p: &Matrix<f64>,
    reg: &ConditionalRegressor,
    spec: &MCSpec,
) -> Result<EstimatorReport> {
    check_t(t)?;
    let n = x.len() / d;
    let spec = spec.with_samples(n);
    let chol = p.inverse()?.cholesky()?;
    let noise: Vec<f64> = spec.draw(d, |r, row| {
        for v in row.iter_mut() {
            *v = StandardNormal.sample(r);
        }
    })?;
    let (a, b) = (t.sqrt(), (1.0 - t).sqrt());
    let mut z = Vec::with_capacity(n * d);
    let mut xt = Vec::with_capacity(n * d);
    for (i, row) in noise.chunks(d).enumerate() {
        let zi = chol.mul_vec(row);
        for j in 0..d {
            xt.push(a * x[i * d + j] + b * zi[j]);
        }
        z.extend(zi);
    }
    let s = ChannelSamples { n, d, x, z, xt };
    let terms = mmse_terms(&s, reg)?;
    let (jst, se) = scalar_mean(&jst_terms_from_mmse_with(t, p, &terms, d));
    Ok(EstimatorReport::scalar(jst, se, n, "mmse-cross-fit", Some(spec.seed)))
}

pub fn mmse_score(point: &ChannelPoint, reg: &ConditionalRegressor, spec: &MCSpec) -> Result<MmseScoreReport> {
    let s = point.sample(spec)?;
    let d = s.d;
    let t = point.t;
    let p = point.base.precision.clone();
    let f = fit(&s.xt, d, &s.x, d, reg)?;
    let score = FittedScore {
        fit: f,
        lin: p.scale(-1.0 / (1.0 - t)),
        gain: p.scale(t.sqrt() / (1.0 - t)),
        gamma_inv: p.clone(),
        method: "conditional-mean",
    };
    let terms = mmse_terms(&s, reg)?;
    let (m, m_se) = matrix_mean(&terms, d);
    let c = t / ((1.0 - t) * (1.0 - t));
    let j = &p.scale(1.0 / (1.0 - t)) - &(&(&p * &m) * &p).scale(c);
    let pa = p.map(f64::abs);
    let j_se = (&(&pa * &m_se) * &pa).scale(c);
    let (jst, jst_se) = scalar_mean(&jst_terms_from_mmse(point, &terms, d));
    Ok(MmseScoreReport {
        score,
        j: EstimatorReport::matrix(&j.symmetrized(), &j_se, s.n, "conditional-mean", Some(spec.seed)),
        j_st: EstimatorReport::scalar(jst, jst_se, s.n, "conditional-mean", Some(spec.seed)),
        mmse: EstimatorReport::matrix(&m.symmetrized(), &m_se, s.n, "mmse-cross-fit", Some(spec.seed)),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelJstReport {
    pub j_st: EstimatorReport,
    /// Relative Fisher information matrix of `X_t`.
    pub j_rel: EstimatorReport,
    /// `J(X_t) = J_rel + C^{-1}`.
    pub j: EstimatorReport,
}

/// Per-sample `(t^2/(1-t)) sym(V m_V(X_t)^T)` with cross-fitted `m_V`.
fn kernel_terms(point: &ChannelPoint, s: &ChannelSamples, reg: &ConditionalRegressor) -> Result<Vec<f64>> {
    let d = s.d;
    let t = point.t;
    let v = point.kernel_targets(s)?;
    let c = t * t / (1.0 - t);
    if point.base.is_gaussian() {
        return Ok(vec![0.0; s.n * d * d]);
    }
    let m = cross_fit(&s.xt, d, &v, d, reg)?;
    let mut terms = Vec::with_capacity(s.n * d * d);
    for i in 0..s.n {
        let vi = &v[i * d..(i + 1) * d];
        let mi = &m[i * d..(i + 1) * d];
        for r in 0..d {
            for q in 0..d {
                terms.push(c * 0.5 * (vi[r] * mi[q] + mi[r] * vi[q]));
            }
        }
    }
    Ok(terms)
}

fn jst_terms(point: &ChannelPoint, rel_terms: &[f64], d: usize) -> Vec<f64> {
    rel_terms
        .chunks(d * d)
        .map(|m| {
            let m = Matrix::from_row_major(d, d, m.to_vec()).expect("square");
            (&point.base.cov * &m).trace()
        })
        .collect()
}

/// `J_st(X_t) = (t^2/(1-t)) tr(C E[m_V m_V^T])`, `m_V = E[(Id - C^{-1} tau(X)) C^{-1} Z | X_t]`.
pub fn kernel_jst(point: &ChannelPoint, reg: &ConditionalRegressor, spec: &MCSpec) -> Result<KernelJstReport> {
    let s = point.sample(spec)?;
    let d = s.d;
    let terms = kernel_terms(point, &s, reg)?;
    let (rel, rel_se) = matrix_mean(&terms, d);
    let (jst, jst_se) = scalar_mean(&jst_terms(point, &terms, d));
    let j = &rel + &point.base.precision;
    let method = "stein-kernel";
    Ok(KernelJstReport {
        j_st: EstimatorReport::scalar(jst, jst_se, s.n, method, Some(spec.seed)),
        j_rel: EstimatorReport::matrix(&rel.symmetrized(), &rel_se, s.n, method, Some(spec.seed)),
        j: EstimatorReport::matrix(&j.symmetrized(), &rel_se, s.n, method, Some(spec.seed)),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MmseIdentityReport {
    pub j_st_kernel: EstimatorReport,
    pub j_st_mmse: EstimatorReport,
    /// `|J_st(kernel) - J_st(mmse)|`.
    pub scalar_residual: f64,
    pub scalar_se: f64,
    /// Largest entry of `(Id - MMSE C^{-1}/(1-t)) - t C E[m_V m_V^T]`.
    pub matrix_residual: f64,
    pub matrix_se: f64,
}

impl MmseIdentityReport {
    /// Both residuals within `k` combined standard errors.
    pub fn holds(&self, k: f64) -> bool {
        self.scalar_residual <= k * self.scalar_se && self.matrix_residual <= k * self.matrix_se
    }
}

/// Compares the kernel form of `J_st(X_t)` with its MMSE form on one sample set.
pub fn mmse_identity_check(point: &ChannelPoint, reg: &ConditionalRegressor, spec: &MCSpec) -> Result<MmseIdentityReport> {
    let s = point.sample(spec)?;
    let d = s.d;
    let t = point.t;
    let kt = kernel_terms(point, &s, reg)?;
    let mt = mmse_terms(&s, reg)?;
    let (k_jst, k_se) = scalar_mean(&jst_terms(point, &kt, d));
    let (m_jst, m_se) = scalar_mean(&jst_terms_from_mmse(point, &mt, d));
    let (rel, rel_se) = matrix_mean(&kt, d);
    let (m, m_mse) = matrix_mean(&mt, d);
    let p = &point.base.precision;
    let c = &point.base.cov;
    let lhs = &Matrix::identity(d) - &(&m * p).scale(1.0 / (1.0 - t));
    // t C E[m_V m_V^T] = (1 - t)/t C J_rel
    let rhs = (c * &rel).scale((1.0 - t) / t);
    let resid = (&lhs - &rhs).max_abs();
    let pa = p.map(f64::abs);
    let ca = c.map(f64::abs);
    let lhs_se = (&m_mse * &pa).scale(1.0 / (1.0 - t));
    let rhs_se = (&ca * &rel_se).scale((1.0 - t) / t);
    let matrix_se = (0..d * d)
        .map(|i| (lhs_se.as_slice()[i].powi(2) + rhs_se.as_slice()[i].powi(2)).sqrt())
        .fold(0.0, f64::max);
    Ok(MmseIdentityReport {
        j_st_kernel: EstimatorReport::scalar(k_jst, k_se, s.n, "stein-kernel", Some(spec.seed)),
        j_st_mmse: EstimatorReport::scalar(m_jst, m_se, s.n, "mmse-cross-fit", Some(spec.seed)),
        scalar_residual: (k_jst - m_jst).abs(),
        scalar_se: (k_se * k_se + m_se * m_se).sqrt(),
        matrix_residual: resid,
        matrix_se,
    })
}

/// `int (s_a - s_b)^2 f` over the central 95% of a grid density, with a
/// noise scale `se = int var f + 2 sqrt(int (s_a - s_b)^2 var f)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedL2 {
    pub value: f64,
    pub se: f64,
}

impl WeightedL2 {
    /// Below `tol` or below `k` standard errors, whichever is larger.
    pub fn within(&self, tol: f64, k: f64) -> bool {
        self.value < tol.max(k * self.se)
    }
}

fn l2_on_grid(
    density: &GridDensity<f64>,
    f: impl Fn(f64) -> (f64, f64, f64),
) -> WeightedL2 {
    let lo = density.quantile(0.025);
    let hi = density.quantile(0.975);
    let h = density.grid().step;
    let (mut sq, mut var, mut cross) = (0.0, 0.0, 0.0);
    for (x, &p) in density.nodes().iter().zip(density.values()) {
        if *x < lo || *x > hi {
            continue;
        }
        let (a, b, v) = f(*x);
        let diff2 = (a - b) * (a - b);
        sq += diff2 * p * h;
        var += v * p * h;
        cross += diff2 * v * p * h;
    }
    WeightedL2 { value: sq, se: var + 2.0 * cross.sqrt() }
}

/// Fitted score against the score of a grid density.
pub fn weighted_l2_vs_density(fit: &FittedScore, density: &GridDensity<f64>) -> WeightedL2 {
    l2_on_grid(density, |x| {
        let v = fit.eval(&[x]);
        (v.score[0], density.score(x).unwrap_or(0.0), v.variance[0])
    })
}

/// Two fitted scores against each other, weighted by a grid density.
pub fn weighted_l2_between(a: &FittedScore, b: &FittedScore, density: &GridDensity<f64>) -> WeightedL2 {
    l2_on_grid(density, |x| {
        let (va, vb) = (a.eval(&[x]), b.eval(&[x]));
        (va.score[0], vb.score[0], va.variance[0] + vb.variance[0])
    })
}

/// Two fitted scores compared at sample points `w` (row-major, any
/// dimension) inside the regression boxes of both.
pub fn weighted_l2_on_samples(a: &FittedScore, b: &FittedScore, w: &[f64]) -> WeightedL2 {
    let d = a.dim();
    let (mut sq, mut var, mut cross, mut n) = (0.0, 0.0, 0.0, 0usize);
    for p in w.chunks(d) {
        let (va, vb) = (a.eval(p), b.eval(p));
        if va.clamped || vb.clamped {
            continue;
        }
        let diff2: f64 = va.score.iter().zip(&vb.score).map(|(x, y)| (x - y) * (x - y)).sum();
        let v: f64 = va.variance.iter().chain(&vb.variance).sum();
        sq += diff2;
        var += v;
        cross += diff2 * v;
        n += 1;
    }
    let n = n.max(1) as f64;
    WeightedL2 { value: sq / n, se: var / n + 2.0 * (cross / n).sqrt() }
}

/// One row of an MMSE sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub t: f64,
    pub mmse: f64,
    pub mmse_se: f64,
    pub j_st_mmse: f64,
    pub j_st_mmse_se: f64,
    pub j_st_kernel: f64,
    pub j_st_kernel_se: f64,
}

/// MMSE and both sample forms of `J_st(X_t)` along a grid of `t`.
pub fn mmse_sweep(base: &Law, ts: &[f64], reg: &ConditionalRegressor, spec: &MCSpec) -> Result<Vec<SweepRow>> {
    ts.iter()
        .map(|&t| {
            let p = ChannelPoint::new(base.clone(), t)?;
            let v = mmse_identity_check(&p, reg, spec)?;
            let m = mmse(&p, reg, spec)?;
            Ok(SweepRow {
                t,
                mmse: m.value(),
                mmse_se: m.se(),
                j_st_mmse: v.j_st_mmse.value(),
                j_st_mmse_se: v.j_st_mmse.se(),
                j_st_kernel: v.j_st_kernel.value(),
                j_st_kernel_se: v.j_st_kernel.se(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reg() -> ConditionalRegressor {
        representation_regressor()
    }

    #[test]
    fn gaussian_representations_vanish() {
        let g = Law::by_name("gaussian").unwrap();
        let p = ChannelPoint::new(g.clone(), 0.5).unwrap();
        let spec = MCSpec::new(3, 20_000);
        let s = gaussian_smoothing_score(&p, &reg(), &spec).unwrap();
        let pts: Vec<Vec<f64>> = (-10..=10).map(|i| vec![i as f64 * 0.2]).collect();
        assert!(s.max_standardized_correction(&pts) <= 3.0);
        let mp = MixturePoint::new(g.clone(), g.clone(), 0.3).unwrap();
        let l2 = score_of_sum_representation(&mp, &reg(), &spec).unwrap();
        assert!(l2.max_standardized_correction(&pts) <= 3.0);
        let th = kernel_jst(&p, &reg(), &spec).unwrap();
        assert_eq!(th.j_st.value(), 0.0);
    }

    #[test]
    fn irregular_score_is_a_capability_error() {
        let e = Law::by_name("exp_centered").unwrap();
        let mp = MixturePoint::new(e.clone(), e, 0.25).unwrap();
        let r = score_of_sum_representation(&mp, &reg(), &MCSpec::new(1, 2000));
        assert!(matches!(r, Err(Error::Capability(_))));
    }

    #[test]
    fn two_summand_form_is_the_cyclic_form_for_two_laws() {
        let x = Law::by_name("laplace").unwrap();
        let y = Law::by_name("mixture").unwrap();
        let spec = MCSpec::new(5, 20_000);
        let a = score_of_sum_representation(&MixturePoint::new(x.clone(), y.clone(), 0.4).unwrap(), &reg(), &spec).unwrap();
        let b = score_of_sum_n(&[x, y], &[0.4, 0.6], &reg(), &spec).unwrap();
        let mut worst: f64 = 0.0;
        for i in -20..=20 {
            let w = [i as f64 * 0.1];
            worst = worst.max((a.eval(&w).score[0] - b.eval(&w).score[0]).abs());
        }
        assert!(worst < 1e-12, "{worst}");
    }

    #[test]
    fn weights_must_lie_on_the_simplex() {
        let g = Law::by_name("gaussian").unwrap();
        let r = score_of_sum_n(&[g.clone(), g], &[0.5, 0.6], &reg(), &MCSpec::new(1, 2000));
        assert!(matches!(r, Err(Error::Domain { .. })));
        assert!(ChannelPoint::new(Law::by_name("gaussian").unwrap(), 1.0).is_err());
    }

    #[test]
    fn gaussian_mmse_and_conditional_mean_score() {
        let g = Law::by_name("gaussian").unwrap();
        let t = 0.5;
        let p = ChannelPoint::new(g, t).unwrap();
        let spec = MCSpec::new(8, 100_000);
        let m = mmse(&p, &reg(), &spec).unwrap();
        assert!((m.value() - (1.0 - t)).abs() < 3.0 * m.se(), "{} +- {}", m.value(), m.se());
        let cm = mmse_score(&p, &reg(), &spec).unwrap();
        let slope = (cm.score.score1(1.0) - cm.score.score1(-1.0)) / 2.0;
        assert!((slope + 1.0).abs() < 0.02, "{slope}");
    }
}
