use steininfo::models::suite::test_suite;
use steininfo::numerics::mc::MCSpec;
use steininfo::numerics::regress::regress_conditional;
use steininfo::representations::representation_regressor;
use steininfo::stein_kernel::{verify_stein_identity, SteinKernel1D};
use steininfo::variational::channel_pairs;
use steininfo::verify::{Verifier, VerifyConfig};
use steininfo::DensityModel1D;

#[test]
fn regression_error_shrinks_with_sample_size() {
    // Y = 0.6 X + 0.8 Z with X, Z standard normal: E[X | Y] = 0.6 Y.
    let g = DensityModel1D::gaussian();
    let reg = representation_regressor();
    let mut last = f64::INFINITY;
    for n in [1_000, 10_000, 100_000] {
        let (x, y) = channel_pairs(&g, 0.36, &MCSpec::new(11, n)).unwrap();
        let fit = regress_conditional(&y, 1, &x, 1, &reg).unwrap();
        let pts: Vec<f64> = (-20..=20).map(|i| i as f64 * 0.1).collect();
        let mse = pts.iter().map(|&w| (fit.eval1(w) - 0.6 * w).powi(2)).sum::<f64>() / pts.len() as f64;
        let rmse = mse.sqrt();
        assert!(rmse < last, "n = {n}: rmse {rmse} not below {last}");
        last = rmse;
    }
    assert!(last < 0.02, "{last}");
}

#[test]
fn perturbed_kernel_fails_identity() {
    let m = DensityModel1D::laplace();
    let k = SteinKernel1D::new(&m).unwrap();
    let suite = test_suite(&m);
    let (ok, _) = verify_stein_identity(&k, &suite).unwrap();
    let (bad, _) = verify_stein_identity(&k.perturbed(0.05), &suite).unwrap();
    assert!(ok < 1e-8 && bad > 1e-3, "{ok} {bad}");
}

#[test]
fn identity_criterion_and_its_negative_control() {
    let good = Verifier::new(VerifyConfig::default()).run(1);
    assert!(good.passed, "{}", good.line());
    let bad = Verifier::new(VerifyConfig { corrupt_kernel: true, ..VerifyConfig::default() }).run(1);
    assert!(!bad.passed);
    assert!(bad.failures().all(|c| c.name.contains("Stein identity") || c.name.contains("E[tau]")));
}
