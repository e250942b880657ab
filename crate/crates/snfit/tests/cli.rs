use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::{Command, Output};

use snfit_core::simulate::{generate_dataset, SimConfig};
use tempfile::TempDir;

fn snfit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snfit"))
        .args(args)
        .env("SNFIT_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn sim_csv(dir: &TempDir) -> PathBuf {
    let data = generate_dataset(&SimConfig::table2(60, 1, 0.0, 21), 0).unwrap();
    let mut s = String::from("y,x1,x2\n");
    for i in 0..data.n() {
        writeln!(s, "{},{},{}", data.y[i], data.x[(i, 1)], data.x[(i, 2)]).unwrap();
    }
    let path = dir.path().join("sim.csv");
    std::fs::write(&path, s).unwrap();
    path
}

#[test]
fn fit_writes_a_json_report() {
    let dir = TempDir::new().unwrap();
    let input = sim_csv(&dir);
    let out = dir.path().join("fit.json");
    let o = snfit(&[
        "fit",
        "--input",
        input.to_str().unwrap(),
        "--response",
        "y",
        "--covariates",
        "x1,x2",
        "--alphas",
        "0,0.5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["software"], "snfit");
    assert_eq!(v["command"], "fit");
    assert_eq!(v["status"], "ok");
    assert_eq!(v["config"]["alphas"], serde_json::json!([0.0, 0.5]));
    assert!(v["wall_clock_seconds"].is_null());
    assert_eq!(v["result"]["fits"].as_array().unwrap().len(), 2);
}

#[test]
fn test_command_csv_output() {
    let dir = TempDir::new().unwrap();
    let input = sim_csv(&dir);
    let o = snfit(&[
        "test",
        "--input",
        input.to_str().unwrap(),
        "--response",
        "y",
        "--covariates",
        "x1,x2",
        "--alphas",
        "0.3",
        "--hypothesis",
        "x1=2",
        "--hypothesis",
        "symmetry",
        "--format",
        "csv",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("alpha,hypothesis,statistic,df,p_value,level,reject"));
    // two hypotheses × three default levels
    assert_eq!(lines.count(), 6);
}

#[test]
fn timing_is_opt_in() {
    let o = snfit(&["are", "--alphas", "0,0.5", "--design-n", "200", "--timing"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["wall_clock_seconds"].as_f64().is_some_and(|t| t >= 0.0));
}

#[test]
fn unknown_column_exits_with_one() {
    let dir = TempDir::new().unwrap();
    let input = sim_csv(&dir);
    let o = snfit(&[
        "fit",
        "--input",
        input.to_str().unwrap(),
        "--response",
        "y",
        "--covariates",
        "nope",
        "--alphas",
        "0.5",
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope"));
}

#[test]
fn alpha_out_of_range_exits_with_one() {
    let dir = TempDir::new().unwrap();
    let input = sim_csv(&dir);
    let o = snfit(&[
        "fit",
        "--input",
        input.to_str().unwrap(),
        "--response",
        "y",
        "--covariates",
        "x1",
        "--alphas",
        "2.5",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn reldiff_of_identical_reports_is_zero() {
    let dir = TempDir::new().unwrap();
    let input = sim_csv(&dir);
    let out = dir.path().join("fit.json");
    let o = snfit(&[
        "fit",
        "--input",
        input.to_str().unwrap(),
        "--response",
        "y",
        "--covariates",
        "x1,x2",
        "--alphas",
        "0.5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let p = out.to_str().unwrap();
    let o = snfit(&["reldiff", "--full", p, "--clean", p, "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| r.ends_with(",0")));
}
