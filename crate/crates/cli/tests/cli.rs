use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_steininfo"))
        .args(args)
        .env_remove("STEININFO_SEED")
        .env_remove("STEININFO_JOBS")
        .output()
        .expect("binary runs")
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("json output")
}

#[test]
fn models_list_is_csv() {
    let o = run(&["models", "list"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("name,support,variance,closed_form_kernel"));
    assert_eq!(lines.count(), 5);
    assert!(text.contains("gauss_mixture"));
}

#[test]
fn gaussian_functionals_pass() {
    let o = run(&["functionals", "--model", "gaussian"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert_eq!(v["passed"], true);
    assert!(v["reports"]["J_st"].as_f64().unwrap().abs() < 1e-8);
    assert!(v["checks"].as_array().unwrap().iter().any(|c| c["name"] == "J_st = 0" && c["passed"] == true));
    assert_eq!(v["config"]["seed"], 20240601);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(run(&["functionals", "--model", "cauchy"]).status.code(), Some(2));
    assert_eq!(run(&["functionals"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["stein-kernel", "--model", "uniform", "--grid", "1:0:3"]).status.code(), Some(2));
}

#[test]
fn numeric_failure_exits_3_with_diagnostic() {
    // t = 1 with an irregular summand score has no finite J_st.
    let o = run(&["clt-rate", "--model", "uniform", "--n", "2", "--t", "1"]);
    assert_eq!(o.status.code(), Some(3));
    let v = json(&o);
    assert!(v["error"].is_string() && v["message"].is_string());
    assert_eq!(v["config"]["command"], "clt-rate");
}

#[test]
fn clt_rate_table_has_bound_column() {
    let o = run(&["clt-rate", "--model", "exp_centered", "--n", "1,2,4,8", "--t", "0.5"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().unwrap().clone();
    let bound = header.iter().position(|h| h == "bound").unwrap();
    let jst = header.iter().position(|h| h == "j_st").unwrap();
    let rows: Vec<_> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 4);
    for (r, n) in rows.iter().zip([1.0, 2.0, 4.0, 8.0]) {
        let b: f64 = r[bound].parse().unwrap();
        assert!((b - 0.5 / n).abs() < 1e-12);
        assert!(r[jst].parse::<f64>().unwrap() <= b);
    }
}

#[test]
fn identity_check_mmse_form() {
    let o = run(&["identity-check", "--model", "uniform", "--t", "0.5", "--which", "mmse-identity"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    assert!(v["reports"]["scalar_residual"].is_number());
}

#[test]
fn corrupted_kernel_fails_stein_check() {
    assert_eq!(run(&["stein-check", "--model", "exp_centered"]).status.code(), Some(0));
    let o = run(&["stein-check", "--model", "exp_centered", "--corrupt-kernel", "0.1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["verify-all", "--criteria", "1", "--corrupt-kernel"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn stein_kernel_grid_skips_outside_support() {
    let o = run(&["stein-kernel", "--model", "uniform", "--grid", "-2:2:5", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(&o);
    let vals = v["reports"]["values"].as_array().unwrap();
    assert_eq!(vals.len(), 3);
    assert_eq!(vals[1]["tau"], 1.5);
}

#[test]
fn config_file_and_overrides() {
    let dir = std::env::temp_dir().join(format!("steininfo-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.toml");
    let out = dir.join("out.json");
    std::fs::write(&cfg, "[run]\nseed = 17\nsamples = 30000\nformat = \"json\"\n[grids]\nt = [0.3, 0.6]\n").unwrap();
    let c = cfg.to_str().unwrap();
    let o = run(&["mmse-sweep", "--model", "laplace", "--config", c, "--out", out.to_str().unwrap()]);
    assert!(o.status.code() == Some(0) || o.status.code() == Some(1));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["config"]["seed"], 17);
    assert_eq!(v["config"]["samples"], 30000);
    assert_eq!(v["reports"].as_array().unwrap().len(), 2);

    let o = Command::new(env!("CARGO_BIN_EXE_steininfo"))
        .args(["debruijn", "--model", "laplace", "--config", c, "--seed", "99"])
        .env("STEININFO_JOBS", "1")
        .output()
        .unwrap();
    let v = json(&o);
    assert_eq!(v["config"]["seed"], 99);
    assert_eq!(v["config"]["jobs"], 1);
    assert!(v["reports"]["rel_err"].as_f64().unwrap() < 0.02);

    std::fs::write(&cfg, "[run]\nsede = 1\n").unwrap();
    assert_eq!(run(&["models", "list", "--config", c]).status.code(), Some(2));
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn help_describes_every_subcommand() {
    let o = run(&["--help"]);
    let text = String::from_utf8(o.stdout).unwrap();
    for cmd in [
        "models", "functionals", "stein-kernel", "stein-check", "identity-check", "mmse-sweep", "debruijn", "clt-rate",
        "poly-sup", "stein-rep", "verify-all",
    ] {
        let line = text.lines().find(|l| l.trim_start().starts_with(cmd)).unwrap_or_else(|| panic!("{cmd} missing"));
        assert!(line.trim().len() > cmd.len() + 10, "{cmd} undocumented");
    }
}
