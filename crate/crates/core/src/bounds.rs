//! Bounds on standardized sums: the Stein discrepancy bound on `J_st`, the
//! monotonicity of `J_st` along convolutions, the entropy and total
//! variation chain, and the CLT rate experiment.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functionals::{grid_functionals, info_report, GridInfo};
use crate::models::{DensityModel1D, MultiModel};
use crate::numerics::mc::{EstimatorReport, MCSpec};
use crate::numerics::regress::ConditionalRegressor;
use crate::numerics::stats::{fit_rate, RateFit};
use crate::numerics::{convolve_densities, Density1D, GridDensity, GridSpec};
use crate::representations::{mmse_channel_jst, representation_regressor};
use crate::stein_kernel::{kernel_discrepancy_1d, SteinKernel1D};
use crate::{Matrix, QuadratureSpec};

/// Grid used for densities of sums and their smoothed versions.
pub const SUM_GRID: GridSpec<f64> = GridSpec { points: 2048, sigma_span: 16.0 };

/// Largest number of summands accepted by the experiments.
pub const MAX_SUMMANDS: usize = 64;

/// Slack applied to deterministic inequalities between quadrature values.
pub const CHAIN_SLACK: f64 = 1e-6;

fn check_standardized(base: &DensityModel1D<f64>) -> Result<()> {
    if base.mean().abs() > 1e-9 || (base.variance() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "summand law `{}` must be centered with unit variance",
            base.name()
        )));
    }
    Ok(())
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 || n > MAX_SUMMANDS {
        return Err(Error::InvalidParameter(format!("n = {n} not in 1..={MAX_SUMMANDS}")));
    }
    Ok(())
}

/// `W_n = n^{-1/2} (X_1 + ... + X_n)` for i.i.d. copies of a standardized law.
///
/// The density of `W_1` is the base law itself; larger `n` are tabulated
/// by convolution, doubling for even `n` and adding one summand for odd `n`.
#[derive(Debug, Clone)]
pub struct SumModel {
    base: DensityModel1D<f64>,
    n: usize,
    grid: Option<GridDensity<f64>>,
    /// Largest mass lost by any of the convolutions.
    max_lost_mass: f64,
}

impl SumModel {
    pub fn new(base: &DensityModel1D<f64>, n: usize, spec: &GridSpec<f64>) -> Result<Self> {
        Ok(Self::family(base, &[n], spec)?.remove(0))
    }

    /// Sums for several `n`, sharing the intermediate convolutions.
    pub fn family(base: &DensityModel1D<f64>, ns: &[usize], spec: &GridSpec<f64>) -> Result<Vec<Self>> {
        check_standardized(base)?;
        let mut memo = BTreeMap::new();
        let mut out = Vec::with_capacity(ns.len());
        for &n in ns {
            check_n(n)?;
            let grid = if n == 1 { None } else { Some(sum_grid(base, n, spec, &mut memo)?) };
            let max_lost_mass = memo.range(..=n).map(|(_, g)| g.lost_mass()).fold(0.0, f64::max);
            out.push(Self { base: base.clone(), n, grid, max_lost_mass });
        }
        Ok(out)
    }

    pub fn base(&self) -> &DensityModel1D<f64> {
        &self.base
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn max_lost_mass(&self) -> f64 {
        self.max_lost_mass
    }

    pub fn grid(&self) -> Option<&GridDensity<f64>> {
        self.grid.as_ref()
    }

    pub fn density(&self) -> &dyn Density1D<f64> {
        match &self.grid {
            Some(g) => g,
            None => &self.base,
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.density().pdf(x)
    }

    /// Score of `W_n`: the base score for `n = 1`, otherwise the derivative
    /// of the log of the grid density.
    pub fn score(&self, x: f64) -> Option<f64> {
        match &self.grid {
            Some(g) => g.score(x),
            None => self.base.score(x).ok(),
        }
    }

    /// Draws of `W_n` by direct summation.
    pub fn sample(&self, spec: &MCSpec) -> Result<Vec<f64>> {
        sample_sum(&self.base, self.n, spec)
    }

    /// Density of `sqrt(t) W_n + sqrt(1 - t) Z` on a grid.
    pub fn smoothed(&self, t: f64, spec: &GridSpec<f64>) -> Result<GridDensity<f64>> {
        if !(t > 0.0 && t < 1.0) {
            return Err(Error::InvalidParameter(format!("smoothing parameter t = {t} not in (0, 1)")));
        }
        let z = DensityModel1D::<f64>::gaussian();
        convolve_densities(self.density(), &z, t.sqrt(), (1.0 - t).sqrt(), spec)
    }
}

/// Draws of `W_n` by direct summation.
pub fn sample_sum(base: &DensityModel1D<f64>, n: usize, spec: &MCSpec) -> Result<Vec<f64>> {
    check_n(n)?;
    let scale = 1.0 / (n as f64).sqrt();
    spec.draw(1, |r, row: &mut [f64]| {
        let s: f64 = (0..n).map(|_| base.sample_f64(r)).sum();
        row[0] = s * scale;
    })
}

fn sum_grid(
    base: &DensityModel1D<f64>,
    n: usize,
    spec: &GridSpec<f64>,
    memo: &mut BTreeMap<usize, GridDensity<f64>>,
) -> Result<GridDensity<f64>> {
    if let Some(g) = memo.get(&n) {
        return Ok(g.clone());
    }
    let g = if n == 2 {
        let s = 0.5f64.sqrt();
        convolve_densities(base, base, s, s, spec)?
    } else if n.is_multiple_of(2) {
        let half = sum_grid(base, n / 2, spec, memo)?;
        let s = 0.5f64.sqrt();
        convolve_densities(&half, &half, s, s, spec)?
    } else {
        let rest = sum_grid(base, n - 1, spec, memo)?;
        let k = n as f64;
        convolve_densities(&rest, base, ((k - 1.0) / k).sqrt(), (1.0 / k).sqrt(), spec)?
    };
    memo.insert(n, g.clone());
    Ok(g)
}

/// Stein discrepancy `E[(1 - tau(X))^2]` of a univariate law.
pub fn discrepancy(base: &DensityModel1D<f64>) -> Result<f64> {
    if base.is_gaussian() {
        return Ok(0.0);
    }
    kernel_discrepancy_1d(&SteinKernel1D::new(base)?)
}

/// `t^2 / (n (1 - t)) * disc`: the bound on `J_st(sqrt(t) W_n + sqrt(1-t) Z)`
/// for i.i.d. summands with Stein discrepancy `disc`. Infinite at `t = 1`.
pub fn discrepancy_bound(disc: f64, n: usize, t: f64) -> Result<f64> {
    check_n(n)?;
    discrepancy_bound_general(&vec![disc; n], t)
}

/// `t^2 / (n^2 (1 - t)) * sum_i disc_i` for independent summands with
/// discrepancies `disc_i`.
pub fn discrepancy_bound_general(discs: &[f64], t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!("t = {t} not in [0, 1]")));
    }
    if discs.is_empty() {
        return Err(Error::InvalidParameter("no summands".into()));
    }
    if let Some(d) = discs.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
        return Err(Error::InvalidParameter(format!("discrepancy {d} is not finite and nonnegative")));
    }
    let total: f64 = discs.iter().sum();
    if total == 0.0 {
        return Ok(0.0);
    }
    if t == 1.0 {
        return Ok(f64::INFINITY);
    }
    let n = discs.len() as f64;
    Ok(t * t / (n * n * (1.0 - t)) * total)
}

/// How `J_st` of a smoothed sum is computed.
#[derive(Debug, Clone)]
pub enum SumMethod {
    /// Node sums on the convolved grid density.
    Grid(GridSpec<f64>),
    /// Channel MMSE from draws of `W_n`, a stochastic cross-check.
    Mmse { spec: MCSpec, regressor: ConditionalRegressor },
}

impl Default for SumMethod {
    fn default() -> Self {
        SumMethod::Grid(SUM_GRID)
    }
}

impl SumMethod {
    pub fn mmse(spec: MCSpec) -> Self {
        SumMethod::Mmse { spec, regressor: representation_regressor() }
    }
}

/// `J_st(sqrt(t) W_n + sqrt(1 - t) Z)`.
pub fn jst_of_smoothed_sum(base: &DensityModel1D<f64>, n: usize, t: f64, method: &SumMethod) -> Result<EstimatorReport> {
    check_standardized(base)?;
    check_n(n)?;
    if base.is_gaussian() {
        let (samples, seed) = match method {
            SumMethod::Grid(_) => (0, None),
            SumMethod::Mmse { spec, .. } => (spec.n_samples, Some(spec.seed)),
        };
        return Ok(EstimatorReport::scalar(0.0, 0.0, samples, "gaussian", seed));
    }
    match method {
        SumMethod::Grid(spec) => {
            let info = smoothed_sum_info(base, n, t, spec)?;
            Ok(EstimatorReport::scalar(info.j_st, info.j_st_se, 0, "grid-quadrature", None))
        }
        SumMethod::Mmse { spec, regressor } => {
            let x = sample_sum(base, n, spec)?;
            mmse_channel_jst(x, 1, t, &Matrix::identity(1), regressor, &spec.substream(1))
        }
    }
}

/// Grid functionals of `sqrt(t) W_n + sqrt(1 - t) Z`; `t = 1` uses `W_n`
/// itself and needs `n >= 2`.
pub fn smoothed_sum_info(base: &DensityModel1D<f64>, n: usize, t: f64, spec: &GridSpec<f64>) -> Result<GridInfo> {
    sum_info(&SumModel::new(base, n, spec)?, t, spec)
}

fn sum_info(sum: &SumModel, t: f64, spec: &GridSpec<f64>) -> Result<GridInfo> {
    if sum.base.is_gaussian() {
        return Ok(GridInfo::default());
    }
    if t == 1.0 {
        let g = sum
            .grid()
            .ok_or_else(|| Error::Capability("t = 1 with one summand has no grid density".into()))?;
        return Ok(grid_functionals(g));
    }
    Ok(grid_functionals(&sum.smoothed(t, spec)?))
}

#[derive(Debug, Clone, Serialize)]
pub struct MonotonicityReport {
    pub t: f64,
    pub j_st_x: f64,
    pub j_st_y: f64,
    pub j_st_mix: f64,
    /// `t J_st(X) + (1 - t) J_st(Y) - J_st(sqrt(t) X + sqrt(1 - t) Y)`.
    pub residual: f64,
    pub se: f64,
}

impl MonotonicityReport {
    pub fn holds(&self, k: f64) -> bool {
        self.residual >= -k * self.se - CHAIN_SLACK
    }
}

fn finite_jst(model: &DensityModel1D<f64>, spec: &QuadratureSpec) -> Result<(f64, f64)> {
    if model.is_gaussian() {
        return Ok((0.0, 0.0));
    }
    let r = info_report(&MultiModel::Univariate(model.clone()), spec)?;
    let j = r.finite_j_st().ok_or_else(|| {
        Error::Capability(format!("J_st of `{}` is infinite; use a smoothed version", model.name()))
    })?;
    Ok((j, r.errors.j_st))
}

/// Residual of `J_st(sqrt(t) X + sqrt(1-t) Y) <= t J_st(X) + (1-t) J_st(Y)`.
pub fn convolution_monotonicity_check(
    x: &DensityModel1D<f64>,
    y: &DensityModel1D<f64>,
    t: f64,
    quad: &QuadratureSpec,
    grid: &GridSpec<f64>,
) -> Result<MonotonicityReport> {
    check_standardized(x)?;
    check_standardized(y)?;
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::InvalidParameter(format!("t = {t} not in (0, 1)")));
    }
    let (jx, ex) = finite_jst(x, quad)?;
    let (jy, ey) = finite_jst(y, quad)?;
    let (jm, em) = if x.is_gaussian() && y.is_gaussian() {
        (0.0, 0.0)
    } else {
        let g = convolve_densities(x, y, t.sqrt(), (1.0 - t).sqrt(), grid)?;
        let info = grid_functionals(&g);
        (info.j_st, info.j_st_se)
    };
    let residual = t * jx + (1.0 - t) * jy - jm;
    let se = (t * t * ex * ex + (1.0 - t) * (1.0 - t) * ey * ey + em * em).sqrt();
    Ok(MonotonicityReport { t, j_st_x: jx, j_st_y: jy, j_st_mix: jm, residual, se })
}

#[derive(Debug, Clone, Serialize)]
pub struct EntropyChain {
    pub n: usize,
    pub t: f64,
    pub j_st: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub d_tv: f64,
    /// `J_st / 2`, the bound on `D`.
    pub d_bound: f64,
    /// `sqrt(D / 2)`, the Pinsker bound on `d_tv`.
    pub tv_bound: f64,
    pub entropy_holds: bool,
    pub pinsker_holds: bool,
}

impl EntropyChain {
    fn new(n: usize, t: f64, info: &GridInfo) -> Self {
        let d_bound = 0.5 * info.j_st;
        let tv_bound = (0.5 * info.entropy).sqrt();
        Self {
            n,
            t,
            j_st: info.j_st,
            d: info.entropy,
            d_tv: info.tv,
            d_bound,
            tv_bound,
            entropy_holds: info.entropy <= d_bound + CHAIN_SLACK,
            pinsker_holds: info.tv <= tv_bound + CHAIN_SLACK,
        }
    }

    pub fn holds(&self) -> bool {
        self.entropy_holds && self.pinsker_holds
    }
}

/// `J_st`, `D` and `d_tv` of `sqrt(t) W_n + sqrt(1 - t) Z` with the checks
/// `D <= J_st / 2` and `2 d_tv <= sqrt(2 D)`.
pub fn entropy_chain(base: &DensityModel1D<f64>, n: usize, t: f64, spec: &GridSpec<f64>) -> Result<EntropyChain> {
    if base.is_gaussian() {
        check_n(n)?;
        return Ok(EntropyChain::new(n, t, &GridInfo::default()));
    }
    Ok(EntropyChain::new(n, t, &smoothed_sum_info(base, n, t, spec)?))
}

/// Rate experiment over a list of summand counts at a fixed `t`.
#[derive(Debug, Clone)]
pub struct CltExperiment {
    pub base: DensityModel1D<f64>,
    pub n_values: Vec<usize>,
    pub t: f64,
    pub spec: MCSpec,
    pub grid: GridSpec<f64>,
    /// Also run the sampling cross-check at every `n`.
    pub cross_check: bool,
}

impl CltExperiment {
    pub fn new(base: DensityModel1D<f64>, n_values: Vec<usize>, t: f64) -> Self {
        Self { base, n_values, t, spec: MCSpec::default(), grid: SUM_GRID, cross_check: false }
    }

    pub fn validate(&self) -> Result<()> {
        check_standardized(&self.base)?;
        if self.n_values.is_empty() {
            return Err(Error::InvalidParameter("empty n grid".into()));
        }
        if self.n_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("n values must be strictly increasing".into()));
        }
        for &n in &self.n_values {
            check_n(n)?;
        }
        if !(self.t > 0.0 && self.t <= 1.0) {
            return Err(Error::InvalidParameter(format!("t = {} not in (0, 1]", self.t)));
        }
        if self.t == 1.0 && !self.base.regular_score() {
            return Err(Error::Capability(format!(
                "`{}` has density jumps; unsmoothed sums are excluded",
                self.base.name()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RateRow {
    pub n: usize,
    pub j_st: f64,
    pub j_st_se: f64,
    pub bound: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub d_tv: f64,
    pub tv_bound: f64,
    pub lost_mass: f64,
    pub dominated: bool,
    pub chain_holds: bool,
    pub cross_check: Option<EstimatorReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub model: String,
    pub t: f64,
    pub discrepancy: f64,
    pub rows: Vec<RateRow>,
    pub fit: Option<RateFit>,
    pub fit_error: Option<String>,
    /// `J_st` at `2n` is at most `J_st` at `n` plus 3 SE, over consecutive
    /// doublings present in the grid.
    pub dyadic_decrease: bool,
}

impl RateReport {
    pub fn all_dominated(&self) -> bool {
        self.rows.iter().all(|r| r.dominated)
    }

    pub fn all_chains_hold(&self) -> bool {
        self.rows.iter().all(|r| r.chain_holds)
    }

    pub fn passed(&self) -> bool {
        self.all_dominated() && self.all_chains_hold() && self.dyadic_decrease
    }
}

/// Runs the experiment. Grid cells are independent and evaluated in
/// parallel; rows are returned in the order of `n_values`.
pub fn run_clt(exp: &CltExperiment) -> Result<RateReport> {
    exp.validate()?;
    let disc = discrepancy(&exp.base)?;
    let sums = SumModel::family(&exp.base, &exp.n_values, &exp.grid)?;
    let rows: Vec<Result<RateRow>> = sums
        .par_iter()
        .map(|sum| -> Result<RateRow> {
            let n = sum.n;
            let info = sum_info(sum, exp.t, &exp.grid)?;
            let bound = discrepancy_bound(disc, n, exp.t)?;
            let chain = EntropyChain::new(n, exp.t, &info);
            let cross_check = if exp.cross_check && exp.t < 1.0 {
                Some(jst_of_smoothed_sum(&exp.base, n, exp.t, &SumMethod::mmse(exp.spec.substream(n as u64)))?)
            } else {
                None
            };
            Ok(RateRow {
                n,
                j_st: info.j_st,
                j_st_se: info.j_st_se,
                bound,
                d: info.entropy,
                d_tv: info.tv,
                tv_bound: chain.tv_bound,
                lost_mass: info.lost_mass.max(sum.max_lost_mass),
                dominated: info.j_st <= bound + 3.0 * info.j_st_se + CHAIN_SLACK,
                chain_holds: chain.holds(),
                cross_check,
            })
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let ns: Vec<f64> = rows.iter().map(|r| r.n as f64).collect();
    let js: Vec<f64> = rows.iter().map(|r| r.j_st).collect();
    let (fit, fit_error) = match fit_rate(&ns, &js, 200, exp.spec.seed) {
        Ok(f) => (Some(f), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let dyadic_decrease = rows.iter().all(|a| {
        rows.iter()
            .find(|b| b.n == 2 * a.n)
            .is_none_or(|b| b.j_st <= a.j_st + 3.0 * (a.j_st_se + b.j_st_se) + CHAIN_SLACK)
    });
    Ok(RateReport { model: exp.base.name().to_string(), t: exp.t, discrepancy: disc, rows, fit, fit_error, dyadic_decrease })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_sums_stay_gaussian() {
        let z = DensityModel1D::gaussian();
        for n in [2, 3, 8] {
            let s = SumModel::new(&z, n, &SUM_GRID).unwrap();
            let g = s.grid().unwrap();
            let err = g
                .nodes()
                .iter()
                .map(|&x| (g.pdf(x) - z.pdf(x)).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-6, "n = {n}: sup error {err}");
        }
    }

    #[test]
    fn two_uniforms_give_a_triangle() {
        let u = DensityModel1D::uniform();
        let s = SumModel::new(&u, 2, &SUM_GRID).unwrap();
        // W_2 = (U_1 + U_2)/sqrt(2) with U_i uniform on [-sqrt 3, sqrt 3].
        let a = 3.0f64.sqrt();
        let top = 2.0f64.sqrt() * a;
        let tri = |w: f64| ((top - w.abs()) / (top * top)).max(0.0);
        for w in [-2.0, -0.7, 0.3, 1.9] {
            assert!((s.pdf(w) - tri(w)).abs() < 1e-6, "w = {w}: {} vs {}", s.pdf(w), tri(w));
        }
        // The interpolant rounds the kink at the apex over one cell.
        assert!((s.pdf(0.0) - tri(0.0)).abs() < 1e-3);
    }

    #[test]
    fn bound_values() {
        assert_eq!(discrepancy_bound(0.0, 5, 0.5).unwrap(), 0.0);
        assert!((discrepancy_bound(1.0, 10, 0.5).unwrap() - 0.05).abs() < 1e-15);
        assert!((discrepancy_bound(0.2, 4, 0.5).unwrap() - 0.025).abs() < 1e-15);
        assert!(discrepancy_bound(1.0, 3, 1.0).unwrap().is_infinite());
        let g = discrepancy_bound_general(&[1.0, 0.2], 0.5).unwrap();
        assert!((g - 0.25 / 4.0 / 0.5 * 1.2).abs() < 1e-15);
        assert!(discrepancy_bound(1.0, 0, 0.5).is_err());
    }

    #[test]
    fn sum_variance_is_one() {
        let x = sample_sum(&DensityModel1D::exp_centered(), 5, &MCSpec::new(3, 100_000)).unwrap();
        let n = x.len() as f64;
        let m2: f64 = x.iter().map(|v| v * v).sum::<f64>() / n;
        let m4: f64 = x.iter().map(|v| v.powi(4)).sum::<f64>() / n;
        let se = ((m4 - m2 * m2) / n).sqrt();
        assert!((m2 - 1.0).abs() < 4.0 * se, "{m2} +- {se}");
    }
}
