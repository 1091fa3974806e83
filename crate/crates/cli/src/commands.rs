use serde::Serialize;
use serde_json::json;
use steininfo::bounds::{run_clt, CltExperiment};
use steininfo::functionals::{channel_jst, debruijn_for_model, info_report, info_report_mc, relative_entropy};
use steininfo::models::suite::{moment_identities, test_suite, verify_score_identity};
use steininfo::models::{model_by_name, register_standard_models, Model};
use steininfo::representations::{
    gaussian_smoothing_score, kernel_jst, mmse_identity_check, mmse_score, mmse_sweep, score_of_sum_representation,
    weighted_l2_vs_density, ChannelPoint, Law, MixturePoint,
};
use steininfo::stein_kernel::{verify_stein_identity, SteinKernel1D};
use steininfo::variational::{channel_pairs, poly_sup, stein_rep_fisher_1d, stein_rep_fisher_multi, TestFunctionBasis};
use steininfo::verify::{Verifier, VerifyConfig, DEBRUIJN_REL_TOL, IDENTITY_TOL, K_SE, L2_TOL, MOMENT_TOL};
use steininfo::{DensityModel1D, GaussianModel, MultiModel, ProductModel};

use crate::config::RunConfig;
use crate::output::{num, to_value, Flag, Outcome, Table};
use crate::CliError;

type Res = Result<Outcome, CliError>;

fn model(name: &str) -> Result<DensityModel1D, CliError> {
    Ok(model_by_name(name)?)
}

pub fn models_list() -> Res {
    #[derive(Serialize)]
    struct Row {
        name: String,
        support: (f64, f64),
        variance: f64,
        closed_form_kernel: bool,
    }
    let rows: Vec<Row> = register_standard_models::<f64>()
        .into_iter()
        .map(|m| Row {
            name: m.name().to_string(),
            support: (m.support().lo(), m.support().hi()),
            variance: m.variance(),
            closed_form_kernel: m.has_closed_form_kernel(),
        })
        .collect();
    let mut table = Table::new(&["name", "support", "variance", "closed_form_kernel"]);
    for r in &rows {
        table.push(vec![
            r.name.clone(),
            format!("[{}, {}]", r.support.0, r.support.1),
            num(r.variance),
            r.closed_form_kernel.to_string(),
        ]);
    }
    Ok(Outcome { reports: to_value(&rows)?, checks: vec![], table: Some(table) })
}

pub fn functionals(cfg: &RunConfig, name: &str, mc: bool) -> Res {
    let m = MultiModel::Univariate(model(name)?);
    let r = if mc { info_report_mc(&m, &cfg.mc())? } else { info_report(&m, &cfg.quadrature)? };
    let e = &r.errors;
    let slack = |se: f64| K_SE * se + 1e-6;
    let mut checks = vec![
        Flag::new("J_st >= 0", r.j_st >= -slack(e.j_st)),
        Flag::new("D <= J_st / 2", r.boundary_divergent || r.d <= 0.5 * r.j_st + slack(e.d + 0.5 * e.j_st)),
        Flag::new("2 d_tv <= sqrt(2 D)", r.d_tv <= (0.5 * r.d.max(0.0)).sqrt() + slack(e.d_tv)),
    ];
    if m.is_gaussian() {
        checks.push(Flag::new("J_st = 0", r.j_st.abs() <= IDENTITY_TOL.max(K_SE * e.j_st)));
    }
    Ok(Outcome { reports: to_value(&r)?, checks, table: None })
}

pub fn stein_kernel(name: &str, grid: &[f64]) -> Res {
    let k = SteinKernel1D::new(&model(name)?)?;
    let s = k.model().support();
    let mut table = Table::new(&["x", "tau"]);
    let mut rows = Vec::new();
    for &x in grid.iter().filter(|&&x| x > s.lo() && x < s.hi()) {
        let tau = k.eval(x)?;
        table.push(vec![num(x), num(tau)]);
        rows.push(json!({ "x": x, "tau": tau }));
    }
    Ok(Outcome { reports: json!({ "model": name, "provenance": format!("{:?}", k.provenance()), "values": rows }), checks: vec![], table: Some(table) })
}

pub fn stein_check(cfg: &RunConfig, name: &str, corrupt: Option<f64>) -> Res {
    let m = model(name)?;
    let suite = test_suite(&m);
    let mut k = SteinKernel1D::new(&m)?;
    if let Some(delta) = corrupt {
        k = k.perturbed(delta);
    }
    let (score_worst, score_rows) = verify_score_identity(&m, &suite, &cfg.quadrature)?;
    let (stein_worst, stein_rows) = verify_stein_identity(&k, &suite)?;
    let tau_mean = k.mean()?;
    let mom = moment_identities(&m, &cfg.quadrature)?;
    let checks = vec![
        Flag::new("score identity", score_worst < IDENTITY_TOL),
        Flag::new("Stein identity", stein_worst < IDENTITY_TOL),
        Flag::new("E[tau] = 1", (tau_mean - 1.0).abs() < MOMENT_TOL),
        Flag::new("E[rho] = 0", mom.score_mean.total.abs() < MOMENT_TOL),
        Flag::new("E[rho X] = -1", (mom.score_cross.total + 1.0).abs() < MOMENT_TOL),
    ];
    let reports = json!({
        "model": name,
        "kernel_perturbation": corrupt,
        "score_identity": { "max_residual": score_worst, "rows": to_value(&score_rows)? },
        "stein_identity": { "max_residual": stein_worst, "rows": to_value(&stein_rows)? },
        "tau_mean": tau_mean,
        "moments": to_value(&mom)?,
    });
    Ok(Outcome { reports, checks, table: None })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Which {
    /// Score of X_t as the conditional mean of the two summand scores.
    TwoSummand,
    /// Score of X_t from the Gaussian smoothing formula.
    Smoothing,
    /// J_st(X_t) from the Stein kernel, against quadrature.
    Kernel,
    /// Score of X_t from the conditional mean E[X | X_t].
    ConditionalMean,
    /// Kernel and MMSE forms of J_st(X_t) on the same draws.
    MmseIdentity,
}

pub fn identity_check(cfg: &RunConfig, name: &str, t: f64, which: Which) -> Res {
    let law = Law::by_name(name)?;
    let p = ChannelPoint::new(law.clone(), t)?;
    let spec = cfg.mc();
    let reg = &cfg.regressor;
    let l2 = |w: steininfo::representations::WeightedL2| -> Res {
        Ok(Outcome { reports: to_value(&w)?, checks: vec![Flag::new("weighted L2 within tolerance", w.within(L2_TOL, K_SE))], table: None })
    };
    match which {
        Which::TwoSummand => {
            let m = MixturePoint::new(law, Law::by_name("gaussian")?, t)?;
            l2(weighted_l2_vs_density(&score_of_sum_representation(&m, reg, &spec)?, p.density()?))
        }
        Which::Smoothing => l2(weighted_l2_vs_density(&gaussian_smoothing_score(&p, reg, &spec)?, p.density()?)),
        Which::ConditionalMean => l2(weighted_l2_vs_density(&mmse_score(&p, reg, &spec)?.score, p.density()?)),
        Which::Kernel => {
            let k = kernel_jst(&p, reg, &spec)?;
            let q = channel_jst(&model(name)?, t, &cfg.quadrature)?;
            let resid = k.j_st.value() - q;
            let ok = resid.abs() <= K_SE * k.j_st.se();
            Ok(Outcome {
                reports: json!({ "kernel": to_value(&k)?, "quadrature": q, "residual": resid }),
                checks: vec![Flag::new("kernel J_st within 3 SE of quadrature", ok)],
                table: None,
            })
        }
        Which::MmseIdentity => {
            let r = mmse_identity_check(&p, reg, &spec)?;
            let ok = r.holds(K_SE);
            Ok(Outcome { reports: to_value(&r)?, checks: vec![Flag::new("kernel and MMSE forms agree", ok)], table: None })
        }
    }
}

pub fn mmse_sweep_cmd(cfg: &RunConfig, name: &str) -> Res {
    let rows = mmse_sweep(&Law::by_name(name)?, &cfg.t_grid, &cfg.regressor, &cfg.mc())?;
    let mut table = Table::new(&["t", "mmse", "mmse_se", "j_st_mmse", "j_st_mmse_se", "j_st_kernel", "j_st_kernel_se"]);
    let mut checks = Vec::new();
    for r in &rows {
        table.push(
            [r.t, r.mmse, r.mmse_se, r.j_st_mmse, r.j_st_mmse_se, r.j_st_kernel, r.j_st_kernel_se].iter().map(|v| num(*v)).collect(),
        );
        let se = r.j_st_mmse_se.hypot(r.j_st_kernel_se);
        checks.push(Flag::new(format!("t={} forms agree", r.t), (r.j_st_mmse - r.j_st_kernel).abs() <= K_SE * se));
    }
    Ok(Outcome { reports: to_value(&rows)?, checks, table: Some(table) })
}

pub fn debruijn(cfg: &RunConfig, name: &str, nodes: usize) -> Res {
    let m = model(name)?;
    let direct = relative_entropy(&MultiModel::Univariate(m.clone()), &GaussianModel::standard(1), &cfg.quadrature)?;
    let r = debruijn_for_model(&m, nodes, &cfg.quadrature)?;
    let rel_err = if direct == 0.0 { r.d_debruijn.abs() } else { (direct - r.d_debruijn).abs() / direct };
    let reports = json!({ "model": name, "D_direct": direct, "D_debruijn": r.d_debruijn, "rel_err": rel_err, "nodes": to_value(&r.nodes)? });
    let ok = if direct == 0.0 { r.d_debruijn.abs() < IDENTITY_TOL } else { rel_err < DEBRUIJN_REL_TOL };
    Ok(Outcome { reports, checks: vec![Flag::new("de Bruijn integral matches", ok)], table: None })
}

pub fn clt_rate(cfg: &RunConfig, name: &str, t: f64, cross_check: bool) -> Res {
    let mut exp = CltExperiment::new(model(name)?, cfg.n_grid.clone(), t);
    exp.spec = cfg.mc();
    exp.cross_check = cross_check;
    let r = run_clt(&exp)?;
    let mut checks = Vec::new();
    let mut table = Table::new(&[
        "n", "j_st", "j_st_se", "bound", "d", "d_tv", "tv_bound", "lost_mass", "dominated", "chain_holds", "cross_check", "cross_check_se",
    ]);
    for row in &r.rows {
        checks.push(Flag::new(format!("n={} J_st <= bound", row.n), row.dominated));
        checks.push(Flag::new(format!("n={} entropy chain", row.n), row.chain_holds));
        let (cc, cc_se) = row.cross_check.as_ref().map(|c| (num(c.value()), num(c.se()))).unwrap_or_default();
        table.push(vec![
            row.n.to_string(),
            num(row.j_st),
            num(row.j_st_se),
            num(row.bound),
            num(row.d),
            num(row.d_tv),
            num(row.tv_bound),
            num(row.lost_mass),
            row.dominated.to_string(),
            row.chain_holds.to_string(),
            cc,
            cc_se,
        ]);
    }
    Ok(Outcome { reports: to_value(&r)?, checks, table: Some(table) })
}

pub fn poly_sup_cmd(cfg: &RunConfig, name: &str, t: f64, degree: usize) -> Res {
    let (x, y) = channel_pairs(&model(name)?, t, &cfg.mc())?;
    let basis = TestFunctionBasis::fit(&y, 1, degree)?;
    let r = poly_sup(&x, &y, &basis, &cfg.regressor)?;
    let mono = r.sup_by_degree.windows(2).all(|w| w[1] >= w[0]);
    let checks = vec![
        Flag::new("sup <= regression + 3 SE", r.lower_bound_holds(K_SE)),
        Flag::new("sup non-decreasing in degree", mono),
    ];
    Ok(Outcome { reports: json!({ "model_x": name, "channel": t, "report": to_value(&r)? }), checks, table: None })
}

pub fn stein_rep(cfg: &RunConfig, name: &str, n: usize, degree: usize, dim: usize) -> Res {
    let m = model(name)?;
    let spec = cfg.mc();
    if dim == 1 {
        let r = stein_rep_fisher_1d(&m, n, degree, &spec)?;
        let checks = vec![Flag::new("sup <= conditional form + 3 SE", r.lower_bound_holds(K_SE))];
        return Ok(Outcome { reports: to_value(&r)?, checks, table: None });
    }
    let p = ProductModel::iid(m, dim)?;
    let r = stein_rep_fisher_multi(&p, n, degree, &spec)?;
    let checks = if name == "gaussian" { vec![Flag::new("consistent with zero", r.consistent_with_zero(K_SE))] } else { vec![] };
    Ok(Outcome { reports: to_value(&r)?, checks, table: None })
}

pub fn verify_all(cfg: &RunConfig, ids: &[u8], corrupt_kernel: bool) -> Res {
    let vc = VerifyConfig {
        seed: cfg.seed,
        n_samples: cfg.samples,
        jobs: cfg.workers,
        quad: cfg.quadrature,
        corrupt_kernel,
    };
    let v = Verifier::new(vc);
    let mut reports = Vec::new();
    let mut table = Table::new(&["criterion", "check", "passed", "value", "reference", "tolerance", "detail"]);
    let mut checks = Vec::new();
    for &id in ids {
        let mut r = v.run(id);
        if cfg.canonical {
            r.seconds = 0.0;
        }
        for c in &r.checks {
            eprintln!("{:>2} {} {:<60} value {:<12.5e} ref {:<12.5e} tol {:.2e}", id, if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.reference, c.tolerance);
            table.push(vec![
                id.to_string(),
                c.name.clone(),
                c.passed.to_string(),
                num(c.value),
                num(c.reference),
                num(c.tolerance),
                c.detail.clone(),
            ]);
        }
        eprintln!("{}", r.line());
        checks.push(Flag::new(format!("criterion {id}: {}", r.title), r.passed));
        reports.push(r);
    }
    Ok(Outcome { reports: to_value(&reports)?, checks, table: Some(table) })
}
