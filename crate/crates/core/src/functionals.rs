//! Information functionals: Fisher information `J`, relative Fisher
//! information matrix, standardised Fisher information `J_st`, relative
//! entropy `D` to the matched Gaussian and total variation.
//!
//! Analytic models are integrated by adaptive Gauss-Kronrod; product models
//! reduce to their components through the linear map. Grid densities (sums,
//! channel outputs) use node sums on their own grid.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::models::suite::expectation_result;
use crate::models::{DensityModel1D, GaussianBlur, GaussianModel, Model, MultiModel, ProductModel};
use crate::numerics::density::Density1D;
use crate::numerics::grid::GridDensity;
use crate::numerics::mc::{MCSpec, Moments};
use crate::numerics::quadrature::{gauss_kronrod, gauss_legendre, QuadratureSpec};
use crate::scalar::{std_normal_pdf, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InfoMethod {
    Quadrature,
    MonteCarlo,
}

/// Uncertainty attached to each field of an [`InfoReport`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfoErrors {
    #[serde(rename = "J")]
    pub j: Vec<Vec<f64>>,
    #[serde(rename = "J_rel")]
    pub j_rel: Vec<Vec<f64>>,
    #[serde(rename = "J_st")]
    pub j_st: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub d_tv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfoReport {
    pub model: String,
    pub dim: usize,
    #[serde(rename = "J")]
    pub j: Vec<Vec<f64>>,
    #[serde(rename = "J_rel")]
    pub j_rel: Vec<Vec<f64>>,
    #[serde(rename = "J_st")]
    pub j_st: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub d_tv: f64,
    pub method: InfoMethod,
    pub errors: InfoErrors,
    /// The density jumps at a support endpoint, so the true `J` and `J_st`
    /// are infinite; the numbers above are the interior integrals.
    pub boundary_divergent: bool,
    pub n: Option<usize>,
    pub seed: Option<u64>,
}

impl InfoReport {
    /// `J_st` if it is a genuine finite value.
    pub fn finite_j_st(&self) -> Option<f64> {
        (!self.boundary_divergent).then_some(self.j_st)
    }
}

/// Relative Fisher information matrix and `J_st = tr(B J_rel)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelativeFisher<T: Real> {
    pub matrix: Matrix<T>,
    pub j_st: T,
}

/// Per-component integrals: `E[rho^2]`, `E[rho]`, `E[(rho + u/v)^2]`,
/// `E[rho + u/v]` and error estimates of the two squares.
#[derive(Debug, Clone, Copy)]
struct ComponentInfo<T> {
    fisher: T,
    score_mean: T,
    rel: T,
    rel_mean: T,
    fisher_err: T,
    rel_err: T,
}

fn component_info<T: Real>(c: &DensityModel1D<T>, spec: &QuadratureSpec<T>) -> Result<ComponentInfo<T>> {
    let v = c.variance();
    let m = c.mean();
    if c.is_gaussian() {
        let z = T::zero();
        return Ok(ComponentInfo { fisher: T::one() / v, score_mean: z, rel: z, rel_mean: z, fisher_err: z, rel_err: z });
    }
    let (lo, hi) = c.effective_range();
    let r = expectation_result(
        c,
        |x| {
            let s = c.score_interior(x);
            let q = s + (x - m) / v;
            [s * s, s, q * q, q]
        },
        lo,
        hi,
        spec,
    )?;
    if r.value.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric(
            "fisher information",
            format!("non-finite score moment for {}", c.name()),
        ));
    }
    Ok(ComponentInfo {
        fisher: r.value[0],
        score_mean: r.value[1],
        rel: r.value[2],
        rel_mean: r.value[3],
        fisher_err: r.error[0],
        rel_err: r.error[2],
    })
}

/// `A^{-T} M A^{-1}` with `M` the second-moment matrix of independent
/// coordinates: `diag` on the diagonal, products of `means` off it.
fn lift<T: Real>(p: &ProductModel<T>, diag: &[T], means: &[T]) -> Matrix<T> {
    let d = diag.len();
    let mut m = Matrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            m[(i, j)] = if i == j { diag[i] } else { means[i] * means[j] };
        }
    }
    pull_back(p, &m)
}

fn pull_back<T: Real>(p: &ProductModel<T>, m: &Matrix<T>) -> Matrix<T> {
    match p.linear_map() {
        None => m.clone(),
        Some(a) => {
            // inverse exists: the map was checked at construction
            let inv = a.inverse().expect("invertible map");
            (&(&inv.transpose() * m) * &inv).symmetrized()
        }
    }
}

fn pull_back_abs<T: Real>(p: &ProductModel<T>, m: &Matrix<T>) -> Matrix<T> {
    match p.linear_map() {
        None => m.clone(),
        Some(a) => {
            let inv = a.inverse().expect("invertible map").map(|v| v.abs());
            &(&inv.transpose() * m) * &inv
        }
    }
}

/// `E[rho rho^T]` on the interior of the support.
pub fn fisher_information<T: Real>(model: &MultiModel<T>, spec: &QuadratureSpec<T>) -> Result<Matrix<T>> {
    Ok(fisher_with_error(model, spec)?.0)
}

fn fisher_with_error<T: Real>(model: &MultiModel<T>, spec: &QuadratureSpec<T>) -> Result<(Matrix<T>, Matrix<T>)> {
    match model {
        MultiModel::Gaussian(g) => Ok((g.precision().clone(), Matrix::zeros(g.dim(), g.dim()))),
        MultiModel::Univariate(c) => {
            let ci = component_info(c, spec)?;
            Ok((Matrix::scalar(ci.fisher), Matrix::scalar(ci.fisher_err)))
        }
        MultiModel::Product(p) => {
            let infos = p.components().iter().map(|c| component_info(c, spec)).collect::<Result<Vec<_>>>()?;
            let diag: Vec<T> = infos.iter().map(|i| i.fisher).collect();
            let means: Vec<T> = infos.iter().map(|i| i.score_mean).collect();
            let errs: Vec<T> = infos.iter().map(|i| i.fisher_err).collect();
            Ok((lift(p, &diag, &means), pull_back_abs(p, &Matrix::diagonal(&errs))))
        }
    }
}

/// `E[(rho + B^{-1} X)(rho + B^{-1} X)^T]` and `J_st = tr(B J_rel)`.
pub fn relative_fisher<T: Real>(model: &MultiModel<T>, spec: &QuadratureSpec<T>) -> Result<RelativeFisher<T>> {
    Ok(relative_with_error(model, spec)?.0)
}

fn relative_with_error<T: Real>(
    model: &MultiModel<T>,
    spec: &QuadratureSpec<T>,
) -> Result<(RelativeFisher<T>, Matrix<T>)> {
    let b = model.covariance();
    b.cholesky().map_err(|_| Error::LinearAlgebra("covariance is not invertible".into()))?;
    let (matrix, err) = match model {
        MultiModel::Gaussian(g) => (Matrix::zeros(g.dim(), g.dim()), Matrix::zeros(g.dim(), g.dim())),
        MultiModel::Univariate(c) => {
            let ci = component_info(c, spec)?;
            (Matrix::scalar(ci.rel), Matrix::scalar(ci.rel_err))
        }
        MultiModel::Product(p) => {
            // rho_X + B^{-1} X = A^{-T} (rho_U + D^{-1} U)
            let infos = p.components().iter().map(|c| component_info(c, spec)).collect::<Result<Vec<_>>>()?;
            let diag: Vec<T> = infos.iter().map(|i| i.rel).collect();
            let means: Vec<T> = infos.iter().map(|i| i.rel_mean).collect();
            let errs: Vec<T> = infos.iter().map(|i| i.rel_err).collect();
            (lift(p, &diag, &means), pull_back_abs(p, &Matrix::diagonal(&errs)))
        }
    };
    let j_st = (&b * &matrix).trace();
    Ok((RelativeFisher { matrix, j_st }, err))
}

fn check_reference<T: Real>(model: &MultiModel<T>, reference: &GaussianModel<T>) -> Result<()> {
    let c = model.covariance();
    if c.rows() != reference.dim() {
        return Err(Error::InvalidParameter("reference dimension differs from the model".into()));
    }
    let diff = (&c - reference.cov()).max_abs();
    if diff > T::c(1e-9) * (T::one() + c.max_abs()) {
        return Err(Error::InvalidParameter(format!(
            "reference covariance differs from the model covariance by {:e}",
            diff.f64()
        )));
    }
    Ok(())
}

fn component_entropy<T: Real>(c: &DensityModel1D<T>, spec: &QuadratureSpec<T>) -> Result<(T, T)> {
    if c.is_gaussian() {
        return Ok((T::zero(), T::zero()));
    }
    let v = c.variance();
    let m = c.mean();
    let log_norm = T::c(0.5) * (T::c(std::f64::consts::TAU) * v).ln();
    let (lo, hi) = c.effective_range();
    let r = expectation_result(
        c,
        |x| {
            let z = x - m;
            [c.log_pdf(x) + log_norm + z * z / (T::c(2.0) * v)]
        },
        lo,
        hi,
        spec,
    )?;
    Ok((r.value[0].max(T::zero()), r.error[0]))
}

/// `D(X || N(0, B))` for the Gaussian with the model's covariance.
///
/// Invertible linear maps leave relative entropy unchanged, so a product
/// model contributes the sum over its components.
pub fn relative_entropy<T: Real>(
    model: &MultiModel<T>,
    reference: &GaussianModel<T>,
    spec: &QuadratureSpec<T>,
) -> Result<T> {
    check_reference(model, reference)?;
    Ok(entropy_with_error(model, spec)?.0)
}

fn entropy_with_error<T: Real>(model: &MultiModel<T>, spec: &QuadratureSpec<T>) -> Result<(T, T)> {
    match model {
        MultiModel::Gaussian(_) => Ok((T::zero(), T::zero())),
        MultiModel::Univariate(c) => component_entropy(c, spec),
        MultiModel::Product(p) => {
            let mut d = T::zero();
            let mut e = T::zero();
            for c in p.components() {
                let (v, err) = component_entropy(c, spec)?;
                d += v;
                e += err;
            }
            Ok((d, e))
        }
    }
}

/// Integration window covering both the model and its matched Gaussian.
fn tv_window<T: Real>(c: &DensityModel1D<T>) -> (T, T, Vec<T>) {
    let sd = c.variance().sqrt();
    let m = c.mean();
    let (lo, hi) = c.effective_range();
    let lo = lo.min(m - T::c(40.0) * sd);
    let hi = hi.max(m + T::c(40.0) * sd);
    let mut breaks = c.breakpoints();
    for k in [-4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0] {
        breaks.push(m + T::c(k) * sd);
    }
    breaks.retain(|&x| x > lo && x < hi);
    (lo, hi, breaks)
}

fn matched_pdf<T: Real>(c: &DensityModel1D<T>, x: T) -> T {
    let sd = c.variance().sqrt();
    std_normal_pdf((x - c.mean()) / sd) / sd
}

/// `(1/2) int |f - phi|` against the matched Gaussian.
pub fn total_variation<T: Real>(
    model: &MultiModel<T>,
    reference: &GaussianModel<T>,
    spec: &QuadratureSpec<T>,
) -> Result<T> {
    check_reference(model, reference)?;
    Ok(tv_with_error(model, spec)?.0)
}

fn tv_with_error<T: Real>(model: &MultiModel<T>, spec: &QuadratureSpec<T>) -> Result<(T, T)> {
    match model {
        MultiModel::Gaussian(_) => Ok((T::zero(), T::zero())),
        MultiModel::Univariate(c) => {
            if c.is_gaussian() {
                return Ok((T::zero(), T::zero()));
            }
            let (lo, hi, breaks) = tv_window(c);
            let r = gauss_kronrod(|x| [(c.pdf(x) - matched_pdf(c, x)).abs()], lo, hi, &breaks, spec)?;
            Ok((r.value[0] / T::c(2.0), r.error[0] / T::c(2.0)))
        }
        MultiModel::Product(p) => {
            let comps = p.components();
            if comps.iter().all(|c| c.is_gaussian()) {
                return Ok((T::zero(), T::zero()));
            }
            match comps {
                [c] => tv_with_error(&MultiModel::Univariate(c.clone()), spec),
                [c1, c2] => {
                    // nested integration in component coordinates
                    let inner_spec = QuadratureSpec { abs_tol: spec.abs_tol.max(T::c(1e-11)), ..*spec };
                    let (lo2, hi2, br2) = tv_window(c2);
                    let (lo1, hi1, br1) = tv_window(c1);
                    let failed = std::sync::atomic::AtomicBool::new(false);
                    let r = gauss_kronrod(
                        |u1| {
                            let f1 = c1.pdf(u1);
                            let g1 = matched_pdf(c1, u1);
                            match gauss_kronrod(
                                |u2| [(f1 * c2.pdf(u2) - g1 * matched_pdf(c2, u2)).abs()],
                                lo2,
                                hi2,
                                &br2,
                                &inner_spec,
                            ) {
                                Ok(r) => [r.value[0]],
                                Err(_) => {
                                    failed.store(true, std::sync::atomic::Ordering::Relaxed);
                                    [T::zero()]
                                }
                            }
                        },
                        lo1,
                        hi1,
                        &br1,
                        &inner_spec,
                    )?;
                    if failed.into_inner() {
                        return Err(Error::numeric("total variation", "inner integral did not converge"));
                    }
                    Ok((r.value[0] / T::c(2.0), r.error[0] / T::c(2.0) + inner_spec.abs_tol))
                }
                _ => Err(Error::Capability("total variation by quadrature supports d <= 2".into())),
            }
        }
    }
}

/// All functionals by quadrature.
pub fn info_report<T: Real>(model: &MultiModel<T>, spec: &QuadratureSpec<T>) -> Result<InfoReport> {
    let (j, j_err) = fisher_with_error(model, spec)?;
    let (rel, rel_err) = relative_with_error(model, spec)?;
    let (d, d_err) = entropy_with_error(model, spec)?;
    let (tv, tv_err) = tv_with_error(model, spec)?;
    let b = model.covariance();
    let j_st_err = (&b.map(|v| v.abs()) * &rel_err).trace();
    Ok(InfoReport {
        model: model.name(),
        dim: model.dim(),
        j: j.symmetrized().to_nested(),
        j_rel: rel.matrix.symmetrized().to_nested(),
        j_st: rel.j_st.f64(),
        d: d.f64(),
        d_tv: tv.f64().clamp(0.0, 1.0),
        method: InfoMethod::Quadrature,
        errors: InfoErrors {
            j: j_err.to_nested(),
            j_rel: rel_err.to_nested(),
            j_st: j_st_err.f64(),
            d: d_err.f64(),
            d_tv: tv_err.f64(),
        },
        boundary_divergent: !model.regular_score(),
        n: None,
        seed: None,
    })
}

/// All functionals as sample means over draws from the model:
/// `D = E[log f - log phi]` and `d_tv = E[(1 - phi/f)_+]`.
pub fn info_report_mc(model: &MultiModel<f64>, spec: &MCSpec) -> Result<InfoReport> {
    let d = model.dim();
    let b = model.covariance();
    let b_inv = b.inverse()?;
    let log_norm = 0.5 * (d as f64 * std::f64::consts::TAU.ln() + b.determinant()?.ln());
    let xs = spec.draw(d, |r, row| model.sample_into(r, row))?;
    let mut jm = vec![Moments::default(); d * d];
    let mut rm = vec![Moments::default(); d * d];
    let mut st = Moments::default();
    let mut ent = Moments::default();
    let mut tv = Moments::default();
    for (i, x) in xs.chunks(d).enumerate() {
        let rho = model.score_at(x)?;
        let bx = b_inv.mul_vec(x);
        let q: Vec<f64> = rho.iter().zip(&bx).map(|(r, v)| r + v).collect();
        for r in 0..d {
            for c in 0..d {
                jm[r * d + c].push(rho[r] * rho[c]);
                rm[r * d + c].push(q[r] * q[c]);
            }
        }
        st.push(b.mul_vec(&q).iter().zip(&q).map(|(a, b)| a * b).sum());
        let quad: f64 = x.iter().zip(&bx).map(|(a, b)| a * b).sum();
        let log_phi = -log_norm - 0.5 * quad;
        let lr = model.log_pdf_at(x) - log_phi;
        if !lr.is_finite() {
            return Err(Error::NonFiniteSample { index: i });
        }
        ent.push(lr);
        tv.push((1.0 - (-lr).exp()).max(0.0));
    }
    let to_mat = |m: &[Moments], f: &dyn Fn(&Moments) -> f64| -> Vec<Vec<f64>> {
        (0..d).map(|r| (0..d).map(|c| f(&m[r * d + c])).collect()).collect()
    };
    let sym = |m: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        (0..d).map(|r| (0..d).map(|c| 0.5 * (m[r][c] + m[c][r])).collect()).collect()
    };
    Ok(InfoReport {
        model: model.name(),
        dim: d,
        j: sym(to_mat(&jm, &|m| m.mean())),
        j_rel: sym(to_mat(&rm, &|m| m.mean())),
        j_st: st.mean(),
        d: ent.mean(),
        d_tv: tv.mean().clamp(0.0, 1.0),
        method: InfoMethod::MonteCarlo,
        errors: InfoErrors {
            j: to_mat(&jm, &|m| m.std_error()),
            j_rel: to_mat(&rm, &|m| m.std_error()),
            j_st: st.std_error(),
            d: ent.std_error(),
            d_tv: tv.std_error(),
        },
        boundary_divergent: !model.regular_score(),
        n: Some(spec.n_samples),
        seed: Some(spec.seed),
    })
}

/// Functionals of a grid density against the Gaussian with its nominal
/// mean and variance. Each `*_se` is the change under halving the grid.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct GridInfo {
    pub fisher: f64,
    pub j_st: f64,
    pub entropy: f64,
    pub tv: f64,
    pub fisher_se: f64,
    pub j_st_se: f64,
    pub entropy_se: f64,
    pub tv_se: f64,
    pub lost_mass: f64,
}

fn grid_sums<T: Real>(g: &GridDensity<T>) -> [f64; 4] {
    let m = g.mean().f64();
    let v = g.variance().f64();
    let sd = v.sqrt();
    let h = g.grid().step.f64();
    let floor = T::density_floor().f64().powf(0.9);
    let mut acc = [0.0; 4];
    for ((x, &f), &s) in g.nodes().iter().zip(g.values()).zip(g.slopes()) {
        let (x, f, s) = (x.f64(), f.f64(), s.f64());
        let z = (x - m) / sd;
        let phi = std_normal_pdf(z) / sd;
        acc[3] += (f - phi).abs();
        if f > floor {
            let rho = s / f;
            let q = rho + (x - m) / v;
            acc[0] += f * rho * rho;
            acc[1] += f * q * q;
            acc[2] += f * (f.ln() - phi.ln());
        }
    }
    [acc[0] * h, acc[1] * v * h, acc[2] * h, acc[3] * h / 2.0]
}

/// `J`, `J_st`, `D` and `d_tv` by node sums on the grid of `g`.
pub fn grid_functionals<T: Real>(g: &GridDensity<T>) -> GridInfo {
    let fine = grid_sums(g);
    let coarse = grid_sums(&g.coarsened());
    let se = |k: usize| (fine[k] - coarse[k]).abs();
    GridInfo {
        fisher: fine[0],
        j_st: fine[1].max(0.0),
        entropy: fine[2].max(0.0),
        tv: fine[3].clamp(0.0, 1.0),
        fisher_se: se(0),
        j_st_se: se(1),
        entropy_se: se(2),
        tv_se: se(3),
        lost_mass: g.lost_mass().f64(),
    }
}

/// `J_st` of the channel output `sqrt(t) X + sqrt(1 - t) Z` by adaptive
/// quadrature of `B (f' + x f / B)^2 / f`, evaluating the density pointwise.
pub fn channel_jst<T: Real>(model: &DensityModel1D<T>, t: T, spec: &QuadratureSpec<T>) -> Result<T> {
    let blur = GaussianBlur::new(model.clone(), t)?;
    if model.is_gaussian() {
        return Ok(T::zero());
    }
    let (a, b) = blur.scales();
    let var = a * a * model.variance() + b * b;
    let m = a * model.mean();
    let (lo, hi) = blur.range();
    let mut breaks = Vec::new();
    for p in blur.breakpoints().into_iter().chain([m]) {
        breaks.push(p);
        for k in [1.0, 2.0, 4.0, 8.0, 16.0] {
            breaks.push(p - T::c(k) * b);
            breaks.push(p + T::c(k) * b);
        }
    }
    breaks.retain(|&x| x > lo && x < hi);
    let floor = T::density_floor();
    let r = gauss_kronrod(
        |x| {
            let [f, df, _] = blur.eval(x);
            if f > floor {
                let q = df / f + (x - m) / var;
                [var * f * q * q]
            } else {
                [T::zero()]
            }
        },
        lo,
        hi,
        &breaks,
        spec,
    )?;
    let v = r.value[0];
    if !v.is_finite() {
        return Err(Error::numeric("channel J_st", format!("non-finite value at t = {}", t.f64())));
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeBruijnNode {
    pub t: f64,
    pub j_st: f64,
    /// Weight of this node in `D = sum weight * j_st`.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeBruijnReport {
    pub d_debruijn: f64,
    pub nodes: Vec<DeBruijnNode>,
}

/// Gauss-Legendre nodes per half of the de Bruijn integral.
pub const DEBRUIJN_NODES: usize = 32;

/// `int_0^1 J_st(X_t) / (2t) dt`, split at `t = 1/2` with `t = u^2` on the
/// left piece and `1 - t = v^2` on the right, each by `nodes`-point
/// Gauss-Legendre. The substitutions leave bounded integrands when
/// `J_st(X_t) = O(t)` near 0 and `O((1 - t)^{-1/2})` near 1.
pub fn debruijn_entropy<T: Real>(
    jst: impl Fn(T) -> Result<T> + Sync,
    nodes: usize,
) -> Result<DeBruijnReport> {
    if nodes == 0 {
        return Err(Error::InvalidParameter("de Bruijn rule needs nodes".into()));
    }
    let (x, w) = gauss_legendre(nodes);
    let half = std::f64::consts::FRAC_1_SQRT_2 / 2.0;
    let mut plan = Vec::with_capacity(2 * nodes);
    for (&xi, &wi) in x.iter().zip(&w) {
        let s = half * (xi + 1.0);
        // left: t = s^2, dt/(2t) = ds / s
        plan.push((s * s, half * wi / s));
        // right: t = 1 - s^2, dt/(2t) = s ds / (1 - s^2)
        plan.push((1.0 - s * s, half * wi * s / (1.0 - s * s)));
    }
    let vals: Vec<Result<T>> = plan.par_iter().map(|&(t, _)| jst(T::c(t))).collect();
    let mut out = Vec::with_capacity(plan.len());
    let mut total = 0.0;
    for (&(t, weight), v) in plan.iter().zip(vals) {
        let v = v.map_err(|e| Error::numeric("de Bruijn integrand", format!("t = {t}: {e}")))?.f64();
        total += weight * v;
        out.push(DeBruijnNode { t, j_st: v, weight });
    }
    out.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(DeBruijnReport { d_debruijn: total, nodes: out })
}

/// [`debruijn_entropy`] of a registered law with `J_st(X_t)` from [`channel_jst`].
pub fn debruijn_for_model<T: Real>(
    model: &DensityModel1D<T>,
    nodes: usize,
    spec: &QuadratureSpec<T>,
) -> Result<DeBruijnReport> {
    debruijn_entropy(|t| channel_jst(model, t, spec), nodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::register_standard_models;

    fn spec() -> QuadratureSpec<f64> {
        QuadratureSpec::default()
    }

    fn uni(m: &DensityModel1D<f64>) -> MultiModel<f64> {
        MultiModel::Univariate(m.clone())
    }

    const HALF_LOG_2PI_E: f64 = 1.418_938_533_204_672_7;

    #[test]
    fn gaussian_fixed_point() {
        let g = uni(&DensityModel1D::gaussian());
        let r = info_report(&g, &spec()).unwrap();
        assert!((r.j[0][0] - 1.0).abs() < 1e-12);
        assert_eq!((r.j_st, r.d, r.d_tv), (0.0, 0.0, 0.0));
        let c = Matrix::from_rows(&[vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let m = MultiModel::Gaussian(GaussianModel::new(c.clone()).unwrap());
        let j = fisher_information(&m, &spec()).unwrap();
        assert!((&j - &c.inverse().unwrap()).max_abs() < 1e-12);
    }

    #[test]
    fn closed_form_entropies() {
        let exp = DensityModel1D::<f64>::exp_centered();
        let uni_ = DensityModel1D::<f64>::uniform();
        let lap = DensityModel1D::<f64>::laplace();
        let reference = GaussianModel::standard(1);
        let cases = [
            (exp, HALF_LOG_2PI_E - 1.0),
            (uni_, HALF_LOG_2PI_E - (2.0 * 3.0_f64.sqrt()).ln()),
            (lap, HALF_LOG_2PI_E - 1.0 - 0.5_f64.sqrt().mul_add(2.0, 0.0).ln()),
        ];
        for (m, exact) in cases {
            let d = relative_entropy(&uni(&m), &reference, &spec()).unwrap();
            assert!((d - exact).abs() < 1e-9, "{}: {d} vs {exact}", m.name());
        }
    }

    #[test]
    fn laplace_information() {
        let r = info_report(&uni(&DensityModel1D::laplace()), &spec()).unwrap();
        assert!((r.j[0][0] - 2.0).abs() < 1e-9);
        assert!((r.j_st - 1.0).abs() < 1e-9);
        assert!(!r.boundary_divergent);
    }

    #[test]
    fn chain_inequalities_for_registered_models() {
        for m in register_standard_models::<f64>() {
            let r = info_report(&uni(&m), &spec()).unwrap();
            assert!(2.0 * r.d_tv <= (2.0 * r.d).sqrt() + 1e-8, "{}", m.name());
            assert!((0.0..=1.0).contains(&r.d_tv));
            if !r.boundary_divergent {
                assert!(r.d <= 0.5 * r.j_st + 1e-6, "{}", m.name());
                assert!((r.j_st - (r.j[0][0] - 1.0)).abs() < 1e-5, "{}", m.name());
            }
        }
    }

    #[test]
    fn uniform_is_flagged_divergent() {
        let r = info_report(&uni(&DensityModel1D::uniform()), &spec()).unwrap();
        assert!(r.boundary_divergent);
        assert_eq!(r.finite_j_st(), None);
        // interior integrand of the relative information is x^2
        assert!((r.j_rel[0][0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn product_models_reduce_to_components() {
        let lap = DensityModel1D::<f64>::laplace();
        let mix = DensityModel1D::<f64>::gauss_mixture(0.8).unwrap();
        let a = Matrix::from_rows(&[vec![1.0, 0.3], vec![-0.2, 0.9]]).unwrap();
        let p = ProductModel::new(vec![lap.clone(), mix.clone()], Some(a)).unwrap();
        let m = MultiModel::Product(p);
        let d = entropy_with_error(&m, &spec()).unwrap().0;
        let d1 = entropy_with_error(&uni(&lap), &spec()).unwrap().0;
        let d2 = entropy_with_error(&uni(&mix), &spec()).unwrap().0;
        assert!((d - d1 - d2).abs() < 1e-10);
        // J_st is invariant under the map as well: tr(B J_rel) = sum of component values
        let r = relative_fisher(&m, &spec()).unwrap();
        let r1 = relative_fisher(&uni(&lap), &spec()).unwrap();
        let r2 = relative_fisher(&uni(&mix), &spec()).unwrap();
        assert!((r.j_st - r1.j_st - r2.j_st).abs() < 1e-9);
        let ev = r.matrix.symmetric_eigenvalues().unwrap();
        assert!(ev.iter().all(|&e| e >= -1e-12));
    }

    #[test]
    fn two_dimensional_total_variation() {
        let lap = DensityModel1D::<f64>::laplace();
        let g = DensityModel1D::<f64>::gaussian();
        // second factor Gaussian: TV equals the one-dimensional value
        let p = MultiModel::Product(ProductModel::new(vec![lap.clone(), g], None).unwrap());
        let tv2 = tv_with_error(&p, &spec()).unwrap().0;
        let tv1 = tv_with_error(&uni(&lap), &spec()).unwrap().0;
        assert!((tv2 - tv1).abs() < 1e-8, "{tv2} {tv1}");
    }

    #[test]
    fn monte_carlo_agrees_with_quadrature() {
        let m = uni(&DensityModel1D::gauss_mixture(0.8).unwrap());
        let q = info_report(&m, &spec()).unwrap();
        let mc = info_report_mc(&m, &MCSpec::new(11, 200_000)).unwrap();
        assert!((mc.j_st - q.j_st).abs() < 4.0 * mc.errors.j_st);
        assert!((mc.d - q.d).abs() < 4.0 * mc.errors.d);
        assert!((mc.d_tv - q.d_tv).abs() < 4.0 * mc.errors.d_tv);
    }

    #[test]
    fn channel_jst_matches_reference_values() {
        // independent Fourier-inversion values at t = 1/2
        let cases = [
            (DensityModel1D::<f64>::exp_centered(), 1.764e-1),
            (DensityModel1D::uniform(), 2.442e-2),
            (DensityModel1D::laplace(), 4.168e-2),
            (DensityModel1D::gauss_mixture(0.8).unwrap(), 1.038e-2),
        ];
        for (m, want) in cases {
            let got = channel_jst(&m, 0.5, &spec()).unwrap();
            assert!((got - want).abs() < 1e-3 * want, "{}: {got} vs {want}", m.name());
        }
    }
}
