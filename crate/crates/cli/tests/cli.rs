use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hellinger_core::estimation::build_g_covariance_extension;
use hellinger_core::gamma::gamma_apply;
use hellinger_core::json::MatrixJson;
use hellinger_core::matrix::{c, CMat, Hermitian};
use hellinger_core::scenario::arma_factor;
use hellinger_core::statespace::{Realization, SpectralFactor};
use serde_json::{json, Value};
use tempfile::TempDir;

fn hellinger(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hellinger"))
        .current_dir(dir)
        .env_remove("HELLINGER_OUT_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read(p: impl AsRef<Path>) -> String {
    fs::read_to_string(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

/// `J` column of a trace.
fn trace_j(text: &str) -> Vec<f64> {
    text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect()
}

fn write_problem(dir: &Path, name: &str, sigma: &Hermitian, n: usize) {
    let bank = build_g_covariance_extension(n).unwrap();
    let prior = Realization::constant(CMat::from_element(1, 1, c(1.0, 0.0)));
    let p = json!({
        "format_version": 1,
        "bank": bank,
        "sigma": MatrixJson::from(sigma.clone()),
        "prior": prior,
    });
    fs::write(dir.join(name), serde_json::to_string(&p).unwrap()).unwrap();
}

#[test]
fn simulate_writes_default_record_lengths() {
    let t = TempDir::new().unwrap();
    let o = hellinger(t.path(), &["simulate", "arma", "--n", "500", "--seed", "1", "--out", "a"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read(t.path().join("a/data.csv")).lines().count(), 501);
    assert!(t.path().join("a/true_spectrum.csv").exists());
    let o = hellinger(t.path(), &["simulate", "sinusoids", "--out", "s"]);
    assert_eq!(code(&o), 0);
    assert_eq!(read(t.path().join("s/data.csv")).lines().count(), 301);
}

#[test]
fn simulate_is_byte_reproducible() {
    let t = TempDir::new().unwrap();
    for out in ["x", "y"] {
        let o = hellinger(t.path(), &["simulate", "bivariate", "--seed", "3", "--runs", "2", "--out", out]);
        assert_eq!(code(&o), 0);
    }
    for f in ["seed_3/data.csv", "seed_4/data.csv", "true_spectrum.csv", "true_factor.json"] {
        assert_eq!(fs::read(t.path().join("x").join(f)).unwrap(), fs::read(t.path().join("y").join(f)).unwrap(), "{f}");
    }
    let manifest: Value = serde_json::from_str(&read(t.path().join("x/manifest.json"))).unwrap();
    assert_eq!(manifest["format_version"], 1);
    assert_eq!(manifest["seed"], 3);
}

#[test]
fn unknown_scenario_is_a_usage_error() {
    let t = TempDir::new().unwrap();
    let o = hellinger(t.path(), &["simulate", "garch", "--out", "g"]);
    assert_eq!(code(&o), 2);
    assert!(!t.path().join("g").exists());
}

#[test]
fn estimate_with_yule_walker_prior() {
    let t = TempDir::new().unwrap();
    hellinger(t.path(), &["simulate", "arma", "--seed", "1", "--out", "sim"]);
    let o = hellinger(t.path(), &["estimate", "sim/data.csv", "--prior", "yw:3", "--out", "est"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["manifest.json", "lambda.json", "w_hat.json", "spectrum.csv", "trace.csv", "diagnostics.json"] {
        assert!(t.path().join("est").join(f).exists(), "{f}");
    }
    let j = trace_j(&read(t.path().join("est/trace.csv")));
    assert!(j.windows(2).all(|w| w[1] <= w[0]));
    let d: Value = serde_json::from_str(&read(t.path().join("est/diagnostics.json"))).unwrap();
    assert!(d["hellinger_distance"].as_f64().unwrap().is_finite());
    let spectrum = read(t.path().join("est/spectrum.csv"));
    assert!(spectrum.starts_with("theta,re_11,im_11\n"));
    assert_eq!(spectrum.lines().count(), 513);
}

#[test]
fn estimate_missing_file_writes_nothing() {
    let t = TempDir::new().unwrap();
    let o = hellinger(t.path(), &["estimate", "absent.csv", "--out", "est"]);
    assert_eq!(code(&o), 2);
    assert!(!t.path().join("est").exists());
}

#[test]
fn out_dir_defaults_to_environment() {
    let t = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_hellinger"))
        .current_dir(t.path())
        .env("HELLINGER_OUT_DIR", "from_env")
        .args(["simulate", "arma", "--n", "50"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(t.path().join("from_env/data.csv").exists());
}

#[test]
fn replay_reproduces_outputs() {
    let t = TempDir::new().unwrap();
    hellinger(t.path(), &["simulate", "arma", "--seed", "2", "--out", "sim"]);
    assert_eq!(code(&hellinger(t.path(), &["estimate", "sim/data.csv", "--out", "a"])), 0);
    assert_eq!(code(&hellinger(t.path(), &["replay", "a/manifest.json", "--out", "b"])), 0);
    for f in ["lambda.json", "w_hat.json", "spectrum.csv", "trace.csv", "sigma.json", "diagnostics.json"] {
        assert_eq!(fs::read(t.path().join("a").join(f)).unwrap(), fs::read(t.path().join("b").join(f)).unwrap(), "{f}");
    }
    // a changed input is refused
    fs::write(t.path().join("sim/data.csv"), "t,y1\n1,0.5\n").unwrap();
    assert_eq!(code(&hellinger(t.path(), &["replay", "a/manifest.json", "--out", "c"])), 2);
}

#[test]
fn approx_feasible_prior_stops_at_start() {
    let t = TempDir::new().unwrap();
    let bank = build_g_covariance_extension(3).unwrap();
    write_problem(t.path(), "p.json", &bank.white_noise_covariance().unwrap(), 3);
    let o = hellinger(t.path(), &["approx", "p.json", "--out", "r"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(read(t.path().join("r/trace.csv")).lines().count(), 2);
    let l: Value = serde_json::from_str(&read(t.path().join("r/lambda.json"))).unwrap();
    let lam: MatrixJson = serde_json::from_value(l["lambda"].clone()).unwrap();
    assert!(lam.data.iter().all(|z| z[0].abs() < 1e-12 && z[1].abs() < 1e-12));
}

#[test]
fn approx_covariance_extension_decreases_j() {
    let t = TempDir::new().unwrap();
    let bank = build_g_covariance_extension(6).unwrap();
    let sigma = gamma_apply(&bank, &SpectralFactor::left(arma_factor())).unwrap();
    write_problem(t.path(), "p.json", &sigma, 6);
    let o = hellinger(t.path(), &["approx", "p.json", "--out", "r"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let j = trace_j(&read(t.path().join("r/trace.csv")));
    assert!(j.len() > 2);
    assert!(j.windows(2).all(|w| w[1] < w[0]), "{j:?}");
}

#[test]
fn approx_infeasible_sigma() {
    let t = TempDir::new().unwrap();
    // not Toeplitz, so outside the range of the shift bank
    write_problem(t.path(), "p.json", &Hermitian::from_diagonal(&[1.0, 2.0, 1.0]), 3);
    let o = hellinger(t.path(), &["approx", "p.json", "--out", "r"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("residual"));
}

#[test]
fn approx_malformed_input() {
    let t = TempDir::new().unwrap();
    fs::write(t.path().join("p.json"), "{\"format_version\": 1}").unwrap();
    assert_eq!(code(&hellinger(t.path(), &["approx", "p.json", "--out", "r"])), 2);
    assert_eq!(code(&hellinger(t.path(), &["approx", "p.json", "--alpha", "0.7"])), 2);
}

fn scalar_spectrum(values: &[f64]) -> String {
    let mut s = String::from("theta,re_11,im_11\n");
    for (k, v) in values.iter().enumerate() {
        s.push_str(&format!("{},{v},0\n", -3.0 + k as f64));
    }
    s
}

fn error_values(dir: &Path) -> Vec<f64> {
    read(dir.join("e_curve.csv"))
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect()
}

#[test]
fn error_curve_of_exact_estimate_is_zero() {
    let t = TempDir::new().unwrap();
    let truth = scalar_spectrum(&[1.0, 2.0, 0.5]);
    fs::write(t.path().join("truth.csv"), &truth).unwrap();
    fs::create_dir_all(t.path().join("runs/one")).unwrap();
    fs::write(t.path().join("runs/one/spectrum.csv"), &truth).unwrap();
    let o = hellinger(t.path(), &["error-curve", "runs", "truth.csv", "--out", "e"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(error_values(&t.path().join("e")), vec![0.0; 3]);
}

#[test]
fn error_curve_averages_runs() {
    let t = TempDir::new().unwrap();
    fs::write(t.path().join("truth.csv"), scalar_spectrum(&[1.0, 1.0])).unwrap();
    for (name, v) in [("a", [1.5, 0.0]), ("b", [2.0, 4.0])] {
        fs::create_dir_all(t.path().join("runs").join(name)).unwrap();
        fs::write(t.path().join("runs").join(name).join("spectrum.csv"), scalar_spectrum(&v)).unwrap();
    }
    assert_eq!(code(&hellinger(t.path(), &["error-curve", "runs", "truth.csv", "--out", "e"])), 0);
    // (0.5 + 1)/2 and (1 + 3)/2
    assert_eq!(error_values(&t.path().join("e")), vec![0.75, 2.0]);
}

#[test]
fn error_curve_rejects_grid_mismatch() {
    let t = TempDir::new().unwrap();
    fs::write(t.path().join("truth.csv"), scalar_spectrum(&[1.0, 1.0])).unwrap();
    fs::create_dir_all(t.path().join("runs/a")).unwrap();
    fs::write(t.path().join("runs/a/spectrum.csv"), scalar_spectrum(&[1.0, 1.0, 1.0])).unwrap();
    assert_eq!(code(&hellinger(t.path(), &["error-curve", "runs", "truth.csv", "--out", "e"])), 2);
}

#[test]
fn bivariate_batch_error_curve() {
    let t = TempDir::new().unwrap();
    let o = hellinger(t.path(), &["simulate", "bivariate", "--runs", "50", "--out", "sim"]);
    assert_eq!(code(&o), 0);
    let mut args = vec!["estimate".to_string()];
    args.extend((0..50).map(|s| format!("sim/seed_{s}/data.csv")));
    args.extend(["--bank", "bivariate", "--jobs", "2", "--out", "est"].map(String::from));
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    let o = hellinger(t.path(), &refs);
    assert!([0, 3].contains(&code(&o)), "{}", String::from_utf8_lossy(&o.stderr));
    let o = hellinger(t.path(), &["error-curve", "est", "sim/true_spectrum.csv", "--out", "curve"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let e = error_values(&t.path().join("curve"));
    assert_eq!(e.len(), 512);
    assert!(e.iter().all(|v| v.is_finite() && *v >= 0.0));
    let runs: Value = serde_json::from_str(&read(t.path().join("curve/e_curve_runs.json"))).unwrap();
    if runs["flagged"].as_array().unwrap().is_empty() {
        let mut sorted = e.clone();
        sorted.sort_by(f64::total_cmp);
        assert!(sorted[sorted.len() - 1] <= 10.0 * sorted[sorted.len() / 2]);
    }
}
