use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn effc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_effc")).args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("stderr is JSON")
}

#[test]
fn analytic_table() {
    let out = effc(&["analytic", "--c", "1", "--lambda", "0.2", "--k-max", "20"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = stdout_json(&out);
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["regime"], "Subcritical");
    assert_eq!(doc["rho_1"].as_f64().unwrap(), 0.6);
    let table = doc["table"].as_array().unwrap();
    assert_eq!(table.len(), 20);
    let e10 = table[9]["hitting_time_from_zero"].as_f64().unwrap();
    assert!((e10 - 1.0 / 3.0).abs() < 1e-15);
    assert_eq!(table[0]["holding_time"].as_f64().unwrap(), 5.0);
}

#[test]
fn analytic_supercritical_has_no_stationary_law() {
    let out = effc(&["analytic", "--c", "1", "--lambda", "0.8", "--k-max", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = stdout_json(&out);
    assert_eq!(doc["regime"], "Supercritical");
    assert!(doc["rho_1"].is_null());
    assert!(doc["table"][0]["stationary_pmf"].is_null());
}

#[test]
fn analytic_csv_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("table.csv");
    let out = effc(&["analytic", "--c", "1", "--lambda", "0.25", "--k-max", "5", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("k,stationary_pmf"));
    let row2: Vec<&str> = lines.nth(1).unwrap().split(',').collect();
    let params = effc_core::ModelParams::new(1.0, 0.25).unwrap();
    let rho2 = effc_core::analytic::stationary_pmf(&params, 2).unwrap();
    assert_eq!(row2[1].parse::<f64>().unwrap(), rho2);
}

#[test]
fn usage_errors_exit_1_with_json() {
    for args in [
        vec!["analytic", "--c", "-1", "--lambda", "0.2"],
        vec!["analytic", "--lambda", "0.2"],
        vec!["frobnicate"],
        vec!["hitting", "--c", "1", "--lambda", "0.2", "--n-max", "100", "--k", "10", "--replicas", "0"],
    ] {
        let out = effc(&args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let err = stderr_json(&out);
        assert_eq!(err["schema_version"], 1);
        assert!(err["error"]["kind"].is_string());
    }
}

#[test]
fn numerical_failure_exits_2() {
    let out = effc(&["oracle", "--c", "1", "--lambda", "0", "--k-max", "10"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"]["kind"], "numerical");
}

fn simulate_to(path: &Path, seed: &str) -> Output {
    effc(&[
        "simulate",
        "--c",
        "1",
        "--lambda",
        "0.2",
        "--n-max",
        "2000",
        "--t-end",
        "2",
        "--seed",
        seed,
        "--out",
        path.to_str().unwrap(),
    ])
}

#[test]
fn simulate_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a.csv"), dir.path().join("b.csv"), dir.path().join("c.csv"));
    let out = simulate_to(&a, "7");
    assert_eq!(out.status.code(), Some(0));
    simulate_to(&b, "7");
    simulate_to(&c, "8");
    let (ta, tb, tc) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap(), std::fs::read(&c).unwrap());
    assert_eq!(ta, tb);
    assert_ne!(ta, tc);
    let text = String::from_utf8(ta).unwrap();
    assert!(text.starts_with("t,state\n0,2000\n"));
    let rows = effc_core::dynamics::read_csv_rows(text.as_bytes()).unwrap();
    assert_eq!(rows.len() as u64, stdout_json(&out)["events"].as_u64().unwrap() + 1);
}

#[test]
fn simulate_to_stdout() {
    let out = effc(&["simulate", "--c", "1", "--lambda", "0", "--n-max", "10", "--t-end", "1e9", "--initial", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let states: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(states, ["5", "4", "3", "2", "1"]);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"c": 2.0, "lambda": 0.1, "k_max": 4}"#).unwrap();
    let out = effc(&["analytic", "--config", cfg.to_str().unwrap(), "--lambda", "0.5"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = stdout_json(&out);
    assert_eq!(doc["params"]["c"].as_f64().unwrap(), 2.0);
    assert_eq!(doc["params"]["theta"].as_f64().unwrap(), 0.5);
    assert_eq!(doc["table"].as_array().unwrap().len(), 4);

    std::fs::write(&cfg, r#"{"c": 1.0, "lambda": 0.1, "speling": 3}"#).unwrap();
    assert_eq!(effc(&["analytic", "--config", cfg.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn hitting_reports_oracle() {
    let out = effc(&[
        "hitting",
        "--c",
        "1",
        "--lambda",
        "0.2",
        "--n-max",
        "1000",
        "--k",
        "10",
        "--replicas",
        "200",
        "--seed",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let doc = stdout_json(&out);
    let (mean, se, oracle) = (
        doc["mean_time"].as_f64().unwrap(),
        doc["mean_time_se"].as_f64().unwrap(),
        doc["oracle_from_ceiling"].as_f64().unwrap(),
    );
    assert!((mean - oracle).abs() < 4.0 * se);
    assert_eq!(doc["reached"], 200);
}

#[test]
fn excursions_and_dimension_write_tables() {
    let dir = tempfile::tempdir().unwrap();
    let exc = dir.path().join("exc.csv");
    let out = effc(&[
        "excursions",
        "--c",
        "1",
        "--lambda",
        "0.25",
        "--n-max",
        "1000",
        "--t-end",
        "50",
        "--seed",
        "1",
        "--replicas",
        "200",
        "--j-window",
        "10,100",
        "--out",
        exc.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let doc = stdout_json(&out);
    assert!(doc["excursions"].as_u64().unwrap() > 0);
    assert_eq!(doc["speed"].as_array().unwrap().len(), 2);
    let total = doc["ceiling_time"].as_f64().unwrap() + doc["excursion_time"].as_f64().unwrap();
    assert!((total - 50.0).abs() < 1e-9 * 50.0);
    assert!(std::fs::read_to_string(&exc).unwrap().starts_with("start,end,duration,min_state\n"));

    let dim = dir.path().join("dim.csv");
    let out = effc(&[
        "dimension",
        "--c",
        "1",
        "--lambda",
        "0.25",
        "--n-max",
        "1000",
        "--t-end",
        "100",
        "--seed",
        "1",
        "--out",
        dim.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let doc = stdout_json(&out);
    let slope = doc["estimate"]["slope"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&slope));
    assert!(std::fs::read_to_string(&dim).unwrap().starts_with("delta,count\n"));
}

#[test]
fn bad_thread_cap_is_usage_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_effc"))
        .args(["analytic", "--c", "1", "--lambda", "0.2"])
        .env("EFFC_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let out = Command::new(env!("CARGO_BIN_EXE_effc"))
        .args(["analytic", "--c", "1", "--lambda", "0.2"])
        .env("EFFC_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn validate_quick_suite_passes() {
    let out = effc(&["validate", "--suite", "quick", "--seed", "42"]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert_eq!(out.status.code(), Some(0), "{stderr}");
    let doc = stdout_json(&out);
    assert_eq!(doc["passed"], true);
    assert_eq!(doc["criteria"].as_array().unwrap().len(), 5);
    assert_eq!(stderr.lines().filter(|l| l.starts_with("criterion")).count(), 5);
}
