//! The acceptance matrix, one test per criterion. Each prints a single
//! PASS/FAIL line; the check-level detail goes to stderr on failure.
//!
//! Pinned tolerances (see `steininfo::verify`):
//!  1  identity residuals < 1e-8, moments within 1e-6
//!  2  Gaussian functionals within 1e-8, estimators within 3 SE of zero
//!  3  weighted L2 < max(0.05, 3 SE), n = 2e5
//!  4  pairwise within 3 combined SE
//!  5  relative error < 2%
//!  6  J_st <= bound + 3 SE + 1e-6; exponential slope in [-1.25, -0.8]
//!  7  residuals >= -3 SE
//!  8  1e-6 slack
//!  9  3 SE; nested fits equal to 1e-12
//! 10  3 SE and 3 combined SE
//! 11  bitwise equality

use std::process::Command;
use std::sync::OnceLock;

use steininfo::verify::{CriterionReport, Verifier, VerifyConfig};

fn verifier() -> &'static Verifier {
    static V: OnceLock<Verifier> = OnceLock::new();
    V.get_or_init(|| Verifier::new(VerifyConfig::default()))
}

fn report(r: &CriterionReport) {
    println!("{}", r.line());
    for c in r.failures() {
        eprintln!("   {} value {} reference {} tolerance {} ({})", c.name, c.value, c.reference, c.tolerance, c.detail);
    }
    assert!(r.passed, "criterion {} failed", r.id);
}

fn criterion(id: u8) {
    report(&verifier().run(id));
}

#[test]
fn criterion_01_defining_identities() {
    criterion(1);
}

#[test]
fn criterion_02_gaussian_fixed_point() {
    criterion(2);
}

#[test]
fn criterion_03_score_representations() {
    criterion(3);
}

#[test]
fn criterion_04_jst_three_ways() {
    criterion(4);
}

#[test]
fn criterion_05_de_bruijn() {
    criterion(5);
}

#[test]
fn criterion_06_bound_and_rate() {
    criterion(6);
}

#[test]
fn criterion_07_monotonicity() {
    criterion(7);
}

#[test]
fn criterion_08_entropy_chain() {
    criterion(8);
}

#[test]
fn criterion_09_finite_basis_supremum() {
    criterion(9);
}

#[test]
fn criterion_10_stein_representation() {
    criterion(10);
}

fn verify_all(jobs: &str) -> Vec<u8> {
    let o = Command::new(env!("CARGO_BIN_EXE_steininfo"))
        .args(["verify-all", "--criteria", "2,9,10", "--samples", "20000", "--canonical", "--jobs", jobs])
        .env_remove("STEININFO_SEED")
        .output()
        .expect("binary runs");
    assert!(matches!(o.status.code(), Some(0 | 1)), "verify-all exit {:?}", o.status.code());
    o.stdout
}

#[test]
fn criterion_11_reproducibility() {
    let mut r = verifier().run(11);
    // Same seed twice through the binary, then with another worker count.
    let a = verify_all("1");
    let b = verify_all("1");
    let c = verify_all("3");
    let push = |r: &mut CriterionReport, name: &str, ok: bool| {
        let mut check = r.checks[0].clone();
        check.name = name.into();
        check.passed = ok;
        check.value = ok as u8 as f64;
        check.detail = "verify-all --canonical output bytes".into();
        r.checks.push(check);
        r.passed &= ok;
    };
    push(&mut r, "binary repeat byte-identical", !a.is_empty() && a == b);
    push(&mut r, "binary worker count byte-identical", a == c);
    report(&r);
}
