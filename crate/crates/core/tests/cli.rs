use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_ddtruss");

fn data_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ddtruss-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn one_bar_data(tag: &str) -> PathBuf {
    let path = scratch(&format!("one_bar_{tag}.csv"));
    let out = run(&["gen-data", "--gen", data_file("linear_one_bar.json").to_str().unwrap(), "--out", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

#[test]
fn gen_data_writes_csv() {
    let out = run(&["gen-data", "--gen", data_file("linear_one_bar.json").to_str().unwrap(), "--seed", "4"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("strain,stress"));
    assert_eq!(lines.count(), 100);
    let again = run(&["gen-data", "--gen", data_file("linear_one_bar.json").to_str().unwrap(), "--seed", "4"]);
    assert_eq!(again.stdout, out.stdout);
}

#[test]
fn solve_prints_state_json() {
    let data = one_bar_data("solve");
    for method in ["robust", "lsq", "ko16"] {
        let out = run(&[
            "solve",
            "--model",
            data_file("one_bar.json").to_str().unwrap(),
            "--data",
            data.to_str().unwrap(),
            "--load",
            data_file("one_bar_load.json").to_str().unwrap(),
            "--method",
            method,
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(v["status"], "Converged");
        let sig = v["sig"][0].as_f64().unwrap();
        assert!((sig - 1.9e6).abs() <= 1e-9 * 1.9e6, "{method}: {sig}");
        assert_eq!(v["u"].as_array().unwrap().len(), 1);
    }
}

#[test]
fn path_prints_one_row_per_multiplier() {
    let data = one_bar_data("path");
    let out = run(&[
        "path",
        "--model",
        data_file("one_bar.json").to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--load",
        data_file("one_bar_load.json").to_str().unwrap(),
        "--probe",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "lambda,probe_disp,status,iterations");
    assert_eq!(lines.len(), 21);
    assert!(lines[1..].iter().all(|l| l.split(',').nth(2) == Some("Converged")));
}

#[test]
fn non_convergence_exits_with_two() {
    let data = one_bar_data("maxiter");
    let out = run(&[
        "solve",
        "--model",
        data_file("one_bar.json").to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--load",
        data_file("one_bar_load.json").to_str().unwrap(),
        "--max-iter",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["status"], "MaxIterExceeded");
}

#[test]
fn errors_exit_with_one() {
    let out = run(&["solve", "--model", "/nonexistent.json", "--data", "x", "--load", "y"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonexistent"));
    assert_eq!(run(&["solve", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    let out = run(&[
        "montecarlo",
        "--model",
        data_file("one_bar.json").to_str().unwrap(),
        "--gen",
        data_file("linear_one_bar.json").to_str().unwrap(),
        "--load",
        data_file("one_bar_load.json").to_str().unwrap(),
        "--probe",
        "0",
        "--methods",
        "ko16",
        "--n-sets",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(1), "ko16 Monte Carlo needs an explicit --c-e");
}

#[test]
fn montecarlo_csv_is_independent_of_threads() {
    let args = |threads: &'static str| {
        vec![
            "montecarlo".to_string(),
            "--model".into(),
            data_file("one_bar.json").to_str().unwrap().into(),
            "--gen".into(),
            data_file("linear_one_bar.json").to_str().unwrap().into(),
            "--load".into(),
            data_file("one_bar_load.json").to_str().unwrap().into(),
            "--probe".into(),
            "0".into(),
            "--n-sets".into(),
            "12".into(),
            "--methods".into(),
            "robust,lsq,ko16".into(),
            "--c-e".into(),
            "2e9".into(),
            "--seed".into(),
            "17".into(),
            "--threads".into(),
            threads.into(),
        ]
    };
    let one = Command::new(BIN).args(args("1")).output().unwrap();
    let four = Command::new(BIN).args(args("4")).output().unwrap();
    assert_eq!(one.status.code(), Some(0), "{}", String::from_utf8_lossy(&one.stderr));
    assert_eq!(one.stdout, four.stdout);
    let text = stdout(&one);
    assert!(text.starts_with("lambda,method,mean,abs_cov,failures,mean_iters\n"));
    assert_eq!(text.lines().count(), 1 + 20 * 3);
}
