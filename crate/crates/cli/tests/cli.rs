use std::path::PathBuf;
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn bellspace(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bellspace")).args(args).env_remove("BELLSPACE_SEED").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn table1_bridge() {
    let o = bellspace(&["table1"]);
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("P(A=1, alpha=0) = 1/3"));
    assert!(s.contains("P(A=1 | alpha=0) = 2/3"));
    assert!(s.contains("P(A_0=1) = 2/3"));
    assert!(s.contains(": true"));
}

#[test]
fn pr_box_violates_inequality_two() {
    let t = data("prbox_table.csv");
    let o = bellspace(&["evaluate", "--table", t.to_str().unwrap(), "--inequality", "2", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v[0]["exact"], "1/2");
    assert_eq!(v[0]["violated"], true);
}

#[test]
fn table_cannot_carry_inequality_one() {
    let t = data("coins_table.csv");
    let o = bellspace(&["evaluate", "--table", t.to_str().unwrap(), "--inequality", "1"]);
    assert_eq!(o.status.code(), Some(4));
    // With `all` the inapplicable ones are skipped.
    let o = bellspace(&["evaluate", "--table", t.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("skipped"));
}

#[test]
fn lhv_model_satisfies_one_two_three() {
    let m = data("threshold_lhv.json");
    let o = bellspace(&["evaluate", "--model", m.to_str().unwrap(), "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let ids: Vec<&str> = v.as_array().unwrap().iter().map(|r| r["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["1", "2", "3"]);
    assert!(v.as_array().unwrap().iter().all(|r| r["violated"] == false));
}

#[test]
fn bad_input_exits_two() {
    assert_eq!(bellspace(&["scan-angles", "--step", "7"]).status.code(), Some(2));
    assert_eq!(bellspace(&["evaluate", "--table", "/nonexistent.csv"]).status.code(), Some(2));
    let m = data("quantum.json");
    assert_eq!(bellspace(&["simulate", "--model", m.to_str().unwrap(), "--runs", "0"]).status.code(), Some(2));
    assert_eq!(bellspace(&["evaluate", "--table", "x", "--inequality", "9"]).status.code(), Some(2));
}

#[test]
fn missing_setting_pair_exits_three() {
    let m = data("quantum.json");
    let o = bellspace(&["simulate", "--model", m.to_str().unwrap(), "--runs", "1000", "--policy", "1,1,1,0"]);
    assert_eq!(o.status.code(), Some(3));
    // Too few runs to reach the per-pair minimum.
    let o = bellspace(&["simulate", "--model", m.to_str().unwrap(), "--runs", "50"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn feasibility_reports_quantum_violation() {
    let t = data("quantum_table.csv");
    let o = bellspace(&["feasibility", "--table", t.to_str().unwrap(), "--negativity", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["certificate"]["feasible"], false);
    let c = data("coins_table.csv");
    let o = bellspace(&["feasibility", "--table", c.to_str().unwrap(), "--format", "json"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["certificate"]["feasible"], true);
    assert_eq!(v["certificate"]["witness"].as_array().unwrap().len(), 16);
}

#[test]
fn simulate_json_log_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.json");
    let m = data("quantum.json");
    let o = bellspace(&[
        "simulate", "--model", m.to_str().unwrap(), "--runs", "2000", "--seed", "5", "--out",
        log.to_str().unwrap(), "--format", "json", "--summary", "json",
    ]);
    assert!(o.status.success());
    let parsed: bellspace_core::RunLog = serde_json::from_str(&std::fs::read_to_string(&log).unwrap()).unwrap();
    assert_eq!(parsed.seed, 5);
    assert_eq!(parsed.rows.len(), 2000);
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["coincidences"], 2000);
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let m = data("quantum.json");
    let run = |seed_env: Option<&str>, seed_arg: Option<&str>, name: &str| {
        let out = dir.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_bellspace"));
        cmd.args(["simulate", "--model", m.to_str().unwrap(), "--runs", "500", "--out", out.to_str().unwrap()]);
        cmd.env_remove("BELLSPACE_SEED");
        if let Some(s) = seed_env {
            cmd.env("BELLSPACE_SEED", s);
        }
        if let Some(s) = seed_arg {
            cmd.args(["--seed", s]);
        }
        assert!(cmd.output().unwrap().status.success());
        std::fs::read(out).unwrap()
    };
    let env = run(Some("17"), None, "env.csv");
    let arg = run(None, Some("17"), "arg.csv");
    let other = run(None, None, "default.csv");
    assert_eq!(env, arg);
    assert_ne!(env, other);
}
