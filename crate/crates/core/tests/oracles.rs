//! Reference values computed independently of the library: closed-form
//! entropies and kernels, Gamma-law Fisher information, and a table of
//! `J_st` values for smoothed sums obtained by Fourier inversion of the
//! summand characteristic function.

use steininfo::bounds::{discrepancy, jst_of_smoothed_sum, smoothed_sum_info, SumMethod, SumModel, SUM_GRID};
use steininfo::functionals::{grid_functionals, info_report, relative_entropy};
use steininfo::models::{model_by_name, Model};
use steininfo::stein_kernel::SteinKernel1D;
use steininfo::{DensityModel1D, GaussianModel, Matrix, MultiModel, QuadratureSpec};

const GAUSS_ENTROPY: f64 = 1.4189385332046727; // ln(2 pi e) / 2

fn d_of(name: &str) -> f64 {
    let m = MultiModel::Univariate(model_by_name(name).unwrap());
    relative_entropy(&m, &GaussianModel::standard(1), &QuadratureSpec::default()).unwrap()
}

#[test]
fn relative_entropy_closed_forms() {
    // h(Exp(1)) = 1, h(U[-a, a]) = ln(2a), h(Laplace(b)) = 1 + ln(2b).
    let cases = [
        ("exp_centered", GAUSS_ENTROPY - 1.0),
        ("uniform", GAUSS_ENTROPY - (2.0 * 3f64.sqrt()).ln()),
        ("laplace", GAUSS_ENTROPY - 1.0 - 2f64.sqrt().ln()),
    ];
    for (name, want) in cases {
        let got = d_of(name);
        assert!((got - want).abs() < 1e-9, "{name}: {got} vs {want}");
    }
}

#[test]
fn mixture_entropy_by_simpson() {
    let m: DensityModel1D = model_by_name("gauss_mixture").unwrap();
    // Plain composite Simpson on [-12, 12]; the density is smooth.
    let n = 24_000;
    let h = 24.0 / n as f64;
    let mut s = 0.0;
    for i in 0..=n {
        let x = -12.0 + i as f64 * h;
        let f = m.pdf(x);
        let v = if f > 0.0 { -f * f.ln() } else { 0.0 };
        let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * v;
    }
    let want = GAUSS_ENTROPY - s * h / 3.0;
    let got = d_of("gauss_mixture");
    assert!((got - want).abs() < 1e-9, "{got} vs {want}");
}

#[test]
fn closed_form_kernels() {
    let uniform = SteinKernel1D::new(&DensityModel1D::uniform()).unwrap();
    let exp = SteinKernel1D::new(&DensityModel1D::exp_centered()).unwrap();
    let laplace = SteinKernel1D::new(&DensityModel1D::laplace()).unwrap();
    for x in [-0.9, -0.3, 0.0, 0.4, 1.2] {
        assert!((uniform.eval(x).unwrap() - (3.0 - x * x) / 2.0).abs() < 1e-12);
        assert!((exp.eval(x).unwrap() - (x + 1.0)).abs() < 1e-12);
        assert!((laplace.eval(x).unwrap() - (0.5 + x.abs() / 2f64.sqrt())).abs() < 1e-12);
    }
}

#[test]
fn kernel_discrepancies() {
    // E[(1 - tau)^2] from the closed-form kernels and moments.
    for (name, want) in [("exp_centered", 1.0), ("uniform", 0.2), ("laplace", 0.25), ("gaussian", 0.0)] {
        let got = discrepancy(&model_by_name(name).unwrap()).unwrap();
        assert!((got - want).abs() < 1e-9, "{name}: {got}");
    }
}

#[test]
fn gamma_sums_relative_fisher() {
    // Standardized Gamma(n): relative Fisher information 2 / (n - 2).
    let e = DensityModel1D::exp_centered();
    for n in [4, 8, 16] {
        let got = smoothed_sum_info(&e, n, 1.0, &SUM_GRID).unwrap().j_st;
        let want = 2.0 / (n as f64 - 2.0);
        assert!((got - want).abs() < 1e-3 * want, "n = {n}: {got} vs {want}");
    }
}

#[test]
fn smoothed_sum_table() {
    // J_st(sqrt(1/2) W_n + sqrt(1/2) Z), n = 1, 2, 4, 8, 16, 32, by Fourier
    // inversion, four significant digits.
    let table: [(&str, [f64; 6]); 4] = [
        ("uniform", [2.442e-2, 4.675e-3, 1.047e-3, 2.478e-4, 6.026e-5, 1.486e-5]),
        ("exp_centered", [1.764e-1, 1.023e-1, 5.599e-2, 2.948e-2, 1.516e-2, 7.694e-3]),
        ("laplace", [4.168e-2, 1.468e-2, 4.539e-3, 1.281e-3, 3.419e-4, 8.843e-5]),
        ("gauss_mixture", [1.038e-2, 2.047e-3, 4.716e-4, 1.135e-4, 2.783e-5, 6.892e-6]),
    ];
    for (name, row) in table {
        let m = model_by_name(name).unwrap();
        let family = SumModel::family(&m, &[1, 2, 4, 8, 16, 32], &SUM_GRID).unwrap();
        for (sum, want) in family.iter().zip(row) {
            let n = sum.n();
            let got = grid_functionals(&sum.smoothed(0.5, &SUM_GRID).unwrap()).j_st;
            assert!((got - want).abs() <= 6e-4 * want, "{name} n = {n}: {got} vs {want}");
        }
    }
    let direct = jst_of_smoothed_sum(&DensityModel1D::laplace(), 8, 0.5, &SumMethod::default()).unwrap();
    assert!((direct.value() - 1.281e-3).abs() <= 6e-4 * 1.281e-3);
}

#[test]
fn gaussian_fixed_point_2d() {
    let c = Matrix::from_rows(&[vec![1.5, -0.4], vec![-0.4, 0.8]]).unwrap();
    let g = GaussianModel::new(c.clone()).unwrap();
    assert_eq!(g.covariance().max_abs(), c.max_abs());
    let r = info_report(&MultiModel::Gaussian(g), &QuadratureSpec::default()).unwrap();
    let p = c.inverse().unwrap();
    for i in 0..2 {
        for j in 0..2 {
            assert!((r.j[i][j] - p[(i, j)]).abs() < 1e-8);
        }
    }
    assert!(r.j_st.abs() < 1e-8 && r.d.abs() < 1e-8 && r.d_tv < 1e-8);
}
