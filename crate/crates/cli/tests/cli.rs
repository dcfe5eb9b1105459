//! End-to-end tests of the doublechar binary: report contents, exit codes,
//! and byte-level determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_doublechar")
}

fn run(args: &[&str]) -> Output {
    Command::new(binary())
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_json(dir: &Path, name: &str, contents: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, contents).unwrap();
    path.to_str().unwrap().to_string()
}

/// Schrödinger symbol |ξ|² + ½⟨V''x,x⟩ for n = 2, V'' = diag(1, 0):
/// A = [[V'', 0], [0, 2I]].
fn schrodinger_rank_deficient() -> &'static str {
    r#"{
  "n": 2,
  "A_re": [[1,0,0,0],[0,0,0,0],[0,0,2,0],[0,0,0,2]],
  "A_im": [[0,0,0,0],[0,0,0,0],[0,0,0,0],[0,0,0,0]]
}"#
}

fn xi2_plus_ix2() -> &'static str {
    r#"{ "n": 1, "A_re": [[0,0],[0,2]], "A_im": [[2,0],[0,0]] }"#
}

fn purely_imaginary_oscillator() -> &'static str {
    r#"{ "n": 1, "A_re": [[0,0],[0,0]], "A_im": [[2,0],[0,2]] }"#
}

fn oscillator() -> &'static str {
    r#"{ "n": 1, "A_re": [[2,0],[0,2]], "A_im": [[0,0],[0,0]] }"#
}

fn x_squared_only() -> &'static str {
    r#"{ "n": 1, "A_re": [[2,0],[0,0]], "A_im": [[0,0],[0,0]] }"#
}

#[test]
fn analyze_schrodinger_example_reports_kernel_cross_zero() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_json(dir.path(), "q.json", schrodinger_rank_deficient());
    let out = dir.path().join("out");
    let res = run(&[
        "analyze-quadform",
        "--input",
        &input,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("quadform_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["singular_dim"], 1);
    // basis spans (0, 1, 0, 0): ker V'' × {0}
    let basis = report["singular_basis"].as_array().unwrap();
    let col0: Vec<f64> = basis.iter().map(|row| row[0].as_f64().unwrap()).collect();
    assert!(col0[0].abs() < 1e-8);
    assert!((col0[1].abs() - 1.0).abs() < 1e-8);
    assert!(col0[2].abs() < 1e-8);
    assert!(col0[3].abs() < 1e-8);
    // F block form: top-right identity
    assert_eq!(report["f_re"][0][2], 1.0);
    assert_eq!(report["f_re"][1][3], 1.0);
    assert!(!report["elliptic_on_s"].as_bool().unwrap());
}

#[test]
fn analyze_zero_form_full_singular_space() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_json(
        dir.path(),
        "q.json",
        r#"{ "n": 1, "A_re": [[0,0],[0,0]], "A_im": [[0,0],[0,0]] }"#,
    );
    let out = dir.path().join("out");
    let res = run(&[
        "analyze-quadform",
        "--input",
        &input,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("quadform_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["singular_dim"], 2);
    assert!(report["k0"].is_null());
}

#[test]
fn analyze_k0_of_xi2_plus_ix2() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_json(dir.path(), "q.json", xi2_plus_ix2());
    let out = dir.path().join("out");
    let res = run(&[
        "analyze-quadform",
        "--input",
        &input,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("quadform_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["k0"], 1);
    assert!(report["elliptic_on_s"].as_bool().unwrap());
}

#[test]
fn analyze_malformed_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_json(dir.path(), "q.json", "{ not json");
    let res = run(&[
        "analyze-quadform",
        "--input",
        &input,
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn analyze_require_k0_exits_3_on_nontrivial_space() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_json(dir.path(), "q.json", purely_imaginary_oscillator());
    let res = run(&[
        "analyze-quadform",
        "--input",
        &input,
        "--out",
        dir.path().join("out").to_str().unwrap(),
        "--require-k0",
    ]);
    assert_eq!(res.status.code(), Some(3));
}

#[test]
fn analyze_reports_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_json(dir.path(), "q.json", xi2_plus_ix2());
    let out = dir.path().join("out");
    let args = [
        "analyze-quadform",
        "--input",
        &input,
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "7",
    ];
    assert!(run(&args).status.success());
    let first = fs::read(out.join("quadform_report.json")).unwrap();
    assert!(run(&args).status.success());
    let second = fs::read(out.join("quadform_report.json")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn good_time_purely_imaginary_closed_form_c() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_json(dir.path(), "q.json", purely_imaginary_oscillator());
    let out = dir.path().join("out");
    let res = run(&[
        "good-time",
        "--input",
        &input,
        "--out",
        out.to_str().unwrap(),
        "--rho",
        "0.1",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("good_time_report.json")).unwrap())
            .unwrap();
    let c = report["good_time"]["c"].as_f64().unwrap();
    let expected = 0.5 * (1.0 - (-0.4f64).exp());
    assert!((c - expected).abs() < 1e-9, "c = {c}, expected {expected}");
    assert_eq!(report["reduction"], "purely_imaginary");
    let cert = report["certificate_min"].as_f64().unwrap();
    assert!(cert >= 0.99 * c);
}

#[test]
fn good_time_elliptic_input_decay_slope_one() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_json(dir.path(), "q.json", oscillator());
    let out = dir.path().join("out");
    let res = run(&[
        "good-time",
        "--input",
        &input,
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("good_time_report.json")).unwrap())
            .unwrap();
    let slope = report["decay_slope"].as_f64().unwrap();
    assert!((slope - 1.0).abs() < 0.1, "slope = {slope}");
    // decay CSV has header + 7 rows
    let csv = fs::read_to_string(out.join("decay_fit.csv")).unwrap();
    assert_eq!(csv.lines().count(), 8);
}

#[test]
fn good_time_x_squared_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_json(dir.path(), "q.json", x_squared_only());
    let res = run(&[
        "good-time",
        "--input",
        &input,
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(4), "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn verify_lp_oscillator_slopes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let res = run(&[
        "verify-lp",
        "--builtin",
        "oscillator",
        "--out",
        out.to_str().unwrap(),
        "--p-list",
        "1,2,inf",
        "--tol",
        "0.02",
        "--grid-n",
        "385",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("lp_report.json")).unwrap()).unwrap();
    assert!(report["all_pass"].as_bool().unwrap());
    let fits = report["fits"].as_array().unwrap();
    let expected = [0.25, 0.0, -0.25];
    for (fit, exp) in fits.iter().zip(expected) {
        let slope = fit["slope"].as_f64().unwrap();
        assert!((slope - exp).abs() < 0.02, "slope {slope} vs {exp}");
    }
    let csv = fs::read_to_string(out.join("lp_scan.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 5 * 3);
}

#[test]
fn verify_lp_complex_potential_passes_at_0p05() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_json(
        dir.path(),
        "v.json",
        r#"{ "coeffs_re": [0, 0, 1], "coeffs_im": [0, 0, 1] }"#,
    );
    let out = dir.path().join("out");
    let res = run(&[
        "verify-lp",
        "--input",
        &input,
        "--out",
        out.to_str().unwrap(),
        "--p-list",
        "1,2,inf",
        "--tol",
        "0.05",
        "--grid-n",
        "513",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("lp_report.json")).unwrap()).unwrap();
    assert!(report["all_pass"].as_bool().unwrap());
    // eigenvalues ≈ h·√(1+i): check the first scan point h = 0.2
    let ev_re = report["eigenvalues_re"][0].as_f64().unwrap();
    let ev_im = report["eigenvalues_im"][0].as_f64().unwrap();
    let sqrt = num_sqrt_1_plus_i();
    assert!((ev_re - 0.2 * sqrt.0).abs() < 1e-3);
    assert!((ev_im - 0.2 * sqrt.1).abs() < 1e-3);
    // eigenfunction CSV sidecars are written and referenced in the report
    let sidecar = report["eigenfunctions"][0]["eigenfunction_csv"]
        .as_str()
        .unwrap()
        .to_string();
    let csv = fs::read_to_string(out.join(&sidecar)).unwrap();
    assert_eq!(csv.lines().count(), 513);
    assert!(report["eigenfunctions"][0]["residual"].as_f64().unwrap() < 1e-8);
}

#[test]
fn verify_lp_delta_reconstruction_ratios_bounded() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let res = run(&[
        "verify-lp",
        "--builtin",
        "oscillator",
        "--out",
        out.to_str().unwrap(),
        "--p-list",
        "2,inf",
        "--h-scan",
        "0.2:0.5:4",
        "--grid-n",
        "385",
        "--delta",
        "1.0",
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("lp_report.json")).unwrap()).unwrap();
    let rows = report["reconstruction"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    for row in rows {
        let ratios: Vec<f64> = row["ratios"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_f64().unwrap())
            .collect();
        let maxr = ratios.iter().cloned().fold(0.0, f64::max);
        let minr = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(maxr / minr < 2.0, "ratio drift {maxr}/{minr}");
    }
}

fn num_sqrt_1_plus_i() -> (f64, f64) {
    let r = 2f64.powf(0.25);
    let theta = std::f64::consts::FRAC_PI_8;
    (r * theta.cos(), r * theta.sin())
}

#[test]
fn verify_lp_impossible_tolerance_exits_5() {
    // discrete eigenfunctions carry O(dx⁴) truncation noise, so a 1e-9
    // slope tolerance cannot be met
    let dir = tempfile::tempdir().unwrap();
    let input = write_json(
        dir.path(),
        "v.json",
        r#"{ "coeffs_re": [0, 0, 1], "coeffs_im": [0, 0, 0] }"#,
    );
    let out = dir.path().join("out");
    let res = run(&[
        "verify-lp",
        "--input",
        &input,
        "--out",
        out.to_str().unwrap(),
        "--tol",
        "1e-9",
        "--grid-n",
        "257",
    ]);
    assert_eq!(res.status.code(), Some(5));
    // the report is still written, with pass = false rows
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("lp_report.json")).unwrap()).unwrap();
    assert!(!report["all_pass"].as_bool().unwrap());
}

#[test]
fn verify_lp_malformed_potential_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_json(dir.path(), "v.json", r#"{ "coeffs_re": [0] }"#);
    let res = run(&[
        "verify-lp",
        "--input",
        &input,
        "--out",
        dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2));
}
