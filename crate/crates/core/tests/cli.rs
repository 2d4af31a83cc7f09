use std::path::Path;
use std::process::{Command, Output};

use acbc::simulation::{gen_gaussian_copula, CopulaConfig};
use approx::assert_relative_eq;
use serde_json::Value;

fn acbc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_acbc"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_copula_csv(path: &Path, n: usize, rho: f64) {
    let s = gen_gaussian_copula(&CopulaConfig { n, d: 3, rho, seed: 42 }).unwrap();
    let mut text = String::from("x1,x2,x3,y\n");
    for i in 0..s.n() {
        let row: Vec<String> = s.x().row(i).iter().map(|v| format!("{v:.17e}")).collect();
        text.push_str(&format!("{},{:.17e}\n", row.join(","), s.y()[i]));
    }
    std::fs::write(path, text).unwrap();
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("valid json")
}

#[test]
fn estimate_reports_point_and_interval() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    write_copula_csv(&data, 300, 0.9);
    let out = acbc(&["estimate", "--input", data.to_str().unwrap(), "--bootstrap-reps", "50"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["n"], 300);
    assert_eq!(v["d"], 3);
    let t_hat = v["t_hat"].as_f64().unwrap();
    let l_hat = v["l_hat"].as_f64().unwrap();
    assert_relative_eq!(v["t_bc"].as_f64().unwrap(), t_hat - 6.0 * l_hat, epsilon = 1e-15);
    assert_relative_eq!(
        v["config"]["lambda"].as_f64().unwrap(),
        300f64.powf(-0.85),
        max_relative = 1e-15
    );
    assert_eq!(v["config"]["m"], 17);
    let ci = v["ci_tbc"].as_array().unwrap();
    assert!(ci[0].as_f64().unwrap() < ci[1].as_f64().unwrap());
}

#[test]
fn degree_zero_gives_no_correction() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    write_copula_csv(&data, 120, 0.5);
    let out = acbc(&[
        "estimate", "--input", data.to_str().unwrap(), "--degree", "0", "--bootstrap-reps", "0",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["l_hat"].as_f64(), Some(0.0));
    assert_eq!(v["t_bc"], v["t_hat"]);
    assert!(v["ci_t"].is_null());
}

#[test]
fn missing_input_is_usage_error() {
    let out = acbc(&["estimate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--input"));
}

#[test]
fn bad_values_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    std::fs::write(&data, "1,2\n3,abc\n").unwrap();
    let missing = dir.path().join("nope.csv");
    for args in [
        vec!["estimate", "--input", data.to_str().unwrap()],
        vec!["estimate", "--input", missing.to_str().unwrap()],
        vec!["simulate", "--rho", "1.5", "--d", "2", "--n", "50", "--reps", "2"],
        vec!["simulate", "--rho", "0", "--d", "2", "--n", "50", "--alpha", "1.5"],
        vec!["frobnicate"],
    ] {
        assert_eq!(acbc(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn unwritable_output_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    write_copula_csv(&data, 50, 0.5);
    let target = dir.path().join("no/such/dir/out.json");
    let out = acbc(&[
        "estimate", "--input", data.to_str().unwrap(), "--bootstrap-reps", "0",
        "--output", target.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn simulate_expands_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("sim");
    let out = acbc(&[
        "simulate", "--rho", "0", "--rho", "0.9", "--n", "100", "--n", "150", "--d", "2",
        "--reps", "3", "--bootstrap-reps", "10", "--out-dir", out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value =
        serde_json::from_slice(&std::fs::read(out_dir.join("report.json")).unwrap()).unwrap();
    let cells = report["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 4);
    assert_eq!(cells[1]["rho"].as_f64(), Some(0.0));
    assert_eq!(cells[1]["n"], 150);
    let csv = std::fs::read_to_string(out_dir.join("raw.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * 3);
    let txt = std::fs::read_to_string(out_dir.join("report.txt")).unwrap();
    assert!(!txt.contains("NaN") && !txt.contains("inf"));
}

#[test]
fn selftest_quick_exits_0() {
    let out = acbc(&["selftest", "--quick"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&out.stdout).matches("PASS").count(), 4);
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    write_copula_csv(&data, 200, 0.7);
    let run = || acbc(&["estimate", "--input", data.to_str().unwrap(), "--seed", "3", "--bootstrap-reps", "40"]).stdout;
    assert_eq!(run(), run());
    let other = acbc(&["estimate", "--input", data.to_str().unwrap(), "--seed", "4", "--bootstrap-reps", "40"]).stdout;
    assert_ne!(run(), other);
}
