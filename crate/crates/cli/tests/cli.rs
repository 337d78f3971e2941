use std::path::Path;
use std::process::{Command, Output};

const QUADRATIC_COS: &str = r#"{"slow":{"kind":"quadratic"},"fast":{"kind":"cos"},"alpha":[1]}"#;

fn msdrift(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_msdrift"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn msdrift")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

#[test]
fn homogenize_prints_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let out = msdrift(&["homogenize", "--model", QUADRATIC_COS, "--sigma", "1"], dir.path());
    let v = stdout_json(&out);
    let k = v["K"].as_f64().unwrap();
    assert!((k - 0.623860).abs() < 1e-6);
    assert_eq!(v["A"][0].as_f64().unwrap(), k);
    assert!(v["Z"].as_f64().unwrap() > 0.0 && v["Z_hat"].as_f64().unwrap() > 0.0);
    assert!((v["Sigma"].as_f64().unwrap() - k).abs() < 1e-15);
}

#[test]
fn simulate_filter_estimate_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let sim = msdrift(
        &[
            "simulate", "--model", QUADRATIC_COS, "--epsilon", "0.1", "--t-final", "30", "--dt", "1e-3", "--seed",
            "5", "--out", "x.bin",
        ],
        p,
    );
    assert!(sim.status.success(), "{}", String::from_utf8_lossy(&sim.stderr));
    let filt = msdrift(&["filter", "--input", "x.bin", "--output", "z.csv", "--delta", "0.5"], p);
    assert!(filt.status.success(), "{}", String::from_utf8_lossy(&filt.stderr));
    assert!(std::fs::read_to_string(p.join("z.csv")).unwrap().starts_with("t,x\n"));

    let given = stdout_json(&msdrift(
        &[
            "estimate", "--input", "x.bin", "--model", QUADRATIC_COS, "--kind", "filtered", "--filtered", "z.csv",
            "--delta", "0.5",
        ],
        p,
    ));
    let computed = stdout_json(&msdrift(
        &["estimate", "--input", "x.bin", "--model", QUADRATIC_COS, "--kind", "filtered", "--delta", "0.5"],
        p,
    ));
    let a = given["value"][0].as_f64().unwrap();
    let b = computed["value"][0].as_f64().unwrap();
    assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    assert_eq!(computed["kind"], "filtered");
    assert!(computed["diagnostics"]["lambda_min"].as_f64().unwrap() > 0.0);

    let sub = stdout_json(&msdrift(
        &["estimate", "--input", "x.bin", "--model", QUADRATIC_COS, "--kind", "subsampled", "--stride", "100"],
        p,
    ));
    assert!(sub["value"][0].as_f64().unwrap().is_finite());

    let bayes = stdout_json(&msdrift(
        &["bayes", "--input", "x.bin", "--model", QUADRATIC_COS, "--epsilon", "0.1", "--delta", "0.5"],
        p,
    ));
    assert!(bayes["trace"].as_f64().unwrap() > 0.0);
    assert_eq!(bayes["cov"][0][0], bayes["trace"]);
    assert!(bayes["distance_to_mle"].as_f64().unwrap().is_finite());
}

#[test]
fn missing_required_flag_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = msdrift(&["filter", "--input", "nope.csv", "--output", "z.csv", "--delta", "1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn experiment_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let ok = r#"{"experiment":"beta_sweep","replicas":1,"burn_in":1,
        "grid":{"sigma":[1],"epsilon":[0.1],"beta":[1,2],"t_final":[5]}}"#;
    std::fs::write(p.join("ok.json"), ok).unwrap();
    let out = msdrift(&["experiment", "--config", "ok.json", "--out", "res/ok.csv", "--seed", "3"], p);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(p.join("res/ok.csv")).unwrap();
    assert!(csv.starts_with("experiment,sigma,epsilon,t_final,zeta,beta,delta,stride,replica,estimator,component,value,failed\n"));
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p.join("res/ok.json")).unwrap()).unwrap();
    assert_eq!(meta["base_seed"], 3);

    let degenerate = r#"{"experiment":"zeta_sweep","replicas":1,"burn_in":1,
        "grid":{"sigma":[0],"epsilon":[0.1],"zeta":[0],"t_final":[5]}}"#;
    std::fs::write(p.join("bad.json"), degenerate).unwrap();
    let out = msdrift(&["experiment", "--config", "bad.json", "--out", "bad.csv"], p);
    assert_eq!(out.status.code(), Some(2));
    assert!(std::fs::read_to_string(p.join("bad.csv")).unwrap().contains(",1\n"));

    std::fs::write(p.join("typo.json"), r#"{"experiment":"zeta_sweep","replica":3}"#).unwrap();
    let out = msdrift(&["experiment", "--config", "typo.json"], p);
    assert_eq!(out.status.code(), Some(1));
}
