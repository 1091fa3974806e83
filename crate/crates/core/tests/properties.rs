use proptest::prelude::*;
use steininfo::bounds::{discrepancy_bound, discrepancy_bound_general};
use steininfo::models::suite::{test_suite, verify_score_identity};
use steininfo::models::{model_by_name, STANDARD_MODEL_NAMES};
use steininfo::numerics::grid::{convolve_densities, GridSpec};
use steininfo::numerics::mc::MCSpec;
use steininfo::numerics::Density1D;
use steininfo::representations::representation_regressor;
use steininfo::stein_kernel::{verify_stein_identity, SteinKernel1D};
use steininfo::variational::{channel_pairs, poly_sup, TestFunctionBasis};
use steininfo::{DensityModel1D, QuadratureSpec};

fn name() -> impl Strategy<Value = &'static str> {
    prop::sample::select(STANDARD_MODEL_NAMES.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn kernel_is_positive_inside_support(a in name(), u in 0.001f64..0.999) {
        let m: DensityModel1D = model_by_name(a).unwrap();
        let (lo, hi) = m.effective_range();
        let s = m.support();
        let x = (lo + u * (hi - lo)).clamp(s.lo() + 1e-9, s.hi() - 1e-9);
        let k = SteinKernel1D::new(&m).unwrap();
        prop_assert!(k.eval(x).unwrap() > 0.0);
    }

    #[test]
    fn smoothed_laws_satisfy_identities(a in name(), t0 in 0.3f64..0.95) {
        let base: DensityModel1D = model_by_name(a).unwrap();
        let m = DensityModel1D::smoothed(&base, t0).unwrap();
        let suite = test_suite(&m);
        let (w, _) = verify_score_identity(&m, &suite, &QuadratureSpec::default()).unwrap();
        prop_assert!(w < 1e-8, "score identity {w}");
        let (w, _) = verify_stein_identity(&SteinKernel1D::new(&m).unwrap(), &suite).unwrap();
        prop_assert!(w < 1e-8, "Stein identity {w}");
    }

    #[test]
    fn bound_monotone(disc in 0.0f64..5.0, n in 1usize..64, t in 0.01f64..0.99, dt in 0.0f64..0.009) {
        let b = discrepancy_bound(disc, n, t).unwrap();
        prop_assert!(b >= 0.0);
        prop_assert!(discrepancy_bound(disc, n + 1, t).unwrap() <= b);
        prop_assert!(discrepancy_bound(disc, n, t + dt).unwrap() >= b);
        let g = discrepancy_bound_general(&vec![disc; n], t).unwrap();
        prop_assert!((g - b).abs() <= 1e-12 * b.max(1.0));
    }

    #[test]
    fn draws_ignore_stream_count(seed in any::<u64>(), streams in 1usize..6) {
        let one = MCSpec::new(seed, 20_000);
        let many = one.with_streams(streams);
        let f = |r: &mut steininfo::numerics::mc::McRng, row: &mut [f64]| {
            row[0] = rand::Rng::random::<f64>(r);
        };
        prop_assert_eq!(one.draw(1, f).unwrap(), many.draw(1, f).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn convolution_is_symmetric(a in name(), b in name(), t in 0.1f64..0.9) {
        let f: DensityModel1D = model_by_name(a).unwrap();
        let g: DensityModel1D = model_by_name(b).unwrap();
        let spec = GridSpec { points: 4096, sigma_span: 16.0 };
        let (s, r) = (t.sqrt(), (1.0 - t).sqrt());
        let fg = convolve_densities(&f, &g, s, r, &spec).unwrap();
        let gf = convolve_densities(&g, &f, r, s, &spec).unwrap();
        for x in [-2.5, -1.0, -0.3, 0.0, 0.7, 1.9] {
            prop_assert!((fg.pdf(x) - gf.pdf(x)).abs() < 1e-10, "x = {x}");
        }
    }

    #[test]
    fn basis_supremum_is_nested(seed in any::<u64>(), t in 0.05f64..0.95, a in name()) {
        let m: DensityModel1D = model_by_name(a).unwrap();
        let (x, y) = channel_pairs(&m, t, &MCSpec::new(seed, 20_000)).unwrap();
        let reg = representation_regressor();
        let full = poly_sup(&x, &y, &TestFunctionBasis::fit(&y, 1, 6).unwrap(), &reg).unwrap();
        prop_assert!(full.sup_by_degree.windows(2).all(|w| w[1] >= w[0]));
        for k in 1..6 {
            let part = poly_sup(&x, &y, &TestFunctionBasis::fit(&y, 1, k).unwrap(), &reg).unwrap();
            prop_assert!((part.sup_estimate - full.sup_by_degree[k - 1]).abs() <= 1e-12);
        }
    }
}
