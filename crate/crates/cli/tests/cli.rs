use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn microvol(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_microvol"))
        .arg("--out-dir")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn unknown_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "kernel.hurst = 0.2\nkernel.colour = blue\n").unwrap();
    let o = microvol(dir.path(), &["--config", cfg.to_str().unwrap(), "kernel-audit"]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn invalid_hurst_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = microvol(dir.path(), &["moments", "--N", "2", "--hurst", "0.7"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn moments_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = microvol(dir.path(), &["moments", "--N", "2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("moments.json")).unwrap()).unwrap();
    // E[P_1^2] = ∫ E[e^{2V_s}] ds is slightly above σ_p² = 1.
    let m2 = v["value"].as_f64().unwrap();
    assert!(m2 > 1.0 && m2 < 1.1, "{m2}");
    assert_eq!(v["term_count"].as_u64(), Some(1));
}

#[test]
fn odd_moment_order_one_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = microvol(dir.path(), &["moments", "--N", "1"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("moments.json")).unwrap()).unwrap();
    assert_eq!(v["value"].as_f64(), Some(0.0));
}

#[test]
fn functionals_csv_has_documented_header() {
    let dir = tempfile::tempdir().unwrap();
    let o = microvol(
        dir.path(),
        &["functionals", "--kernel", "benchmark", "--hurst", "0.3", "--n-min", "16", "--n-max", "64"],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("functionals.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("n,star,diamond,square,triangle,sum"));
    assert_eq!(lines.count(), 3);
    assert!(dir.path().join("functionals_fit.json").exists());
    let svg = fs::read_to_string(dir.path().join("functionals.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn paths_are_reproducible_from_the_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["--seed", "7", "paths", "--n", "64", "--replications", "2", "--grid", "50"];
    assert_eq!(code(&microvol(a.path(), &args)), 0);
    assert_eq!(code(&microvol(b.path(), &args)), 0);
    for f in ["paths_0.csv", "paths_1.csv", "paths_price.svg"] {
        let x = fs::read(a.path().join(f)).unwrap();
        assert_eq!(x, fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let head = fs::read_to_string(a.path().join("paths_0.csv")).unwrap();
    assert!(head.starts_with("t,log_vol,log_price"));
    assert_eq!(head.lines().count(), 51);
}

#[test]
fn noisy_weak_error_run_is_inconclusive() {
    let dir = tempfile::tempdir().unwrap();
    let o = microvol(dir.path(), &["weak-error", "--samples", "1000", "--ns", "16,32,64"]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["weak_error.json", "weak_error.csv", "weak_error.svg"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("weak_error.json")).unwrap()).unwrap();
    assert_eq!(v["points"].as_array().unwrap().len(), 3);
    assert_eq!(v["fit"]["status"], "inconclusive");
}

#[test]
fn too_coarse_quadrature_is_an_accuracy_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = microvol(dir.path(), &["moments", "--N", "4", "--hurst", "0.05", "--nodes", "2"]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn kernel_audit_reports_pass() {
    let dir = tempfile::tempdir().unwrap();
    let o = microvol(dir.path(), &["kernel-audit", "--n", "128"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("kernel_audit.json")).unwrap()).unwrap();
    assert_eq!(v["passed"], true);
}
