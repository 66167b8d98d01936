use std::path::PathBuf;
use std::process::{Command, Output};

fn siggame(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_siggame")).args(args).output().expect("binary runs")
}

fn scenario(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/scenarios")
        .join(name)
        .display()
        .to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

#[test]
fn random_walk_command_value() {
    let o = siggame(&["appendix-a", "--p", "0.25", "--k", "1", "--prior", "0.1"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "0.1290323");
}

#[test]
fn unknown_flag_prints_usage() {
    let o = siggame(&["simulate", "--config", &scenario("table1.json"), "--seed", "1", "--bogus"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn validate_reports_row_defects() {
    let ok = siggame(&["validate", "--config", &scenario("table1.json")]);
    assert!(ok.status.success());
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let text = std::fs::read_to_string(scenario("table1.json")).unwrap();
    std::fs::write(&bad, text.replace("\"x_n\": [0.9, 0.1]", "\"x_n\": [0.9, 0.2]")).unwrap();
    let o = siggame(&["validate", "--config", bad.to_str().unwrap()]);
    assert!(!o.status.success());
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["valid"], false);
    assert!(report["kernel_violations"][0].as_str().unwrap().contains("row sum 1.1"));
}

#[test]
fn equilibrium_reports_root_and_concept() {
    let o = siggame(&["equilibrium", "--config", &scenario("table1.json"), "--belief", "0.1", "--state", "x_n"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["concept"], "bayes_nash");
    assert_eq!(v["root"]["action_benign"], "a_b");
    assert_eq!(v["root"]["action_malicious"], "a_m");
    assert_eq!(v["root"]["reaction"], "r_b");

    let args = ["equilibrium", "--config", &scenario("table1.json"), "--belief", "0.3", "--state", "x_n"];
    let v: serde_json::Value = serde_json::from_str(&stdout(&siggame(&args))).unwrap();
    assert_eq!(v["concept"], "sender_leader");
    assert!(v["cycle"].is_array());
    let mut strict = args.to_vec();
    strict.extend(["--fallback", "fail"]);
    assert!(!siggame(&strict).status.success());
}

#[test]
fn simulate_is_deterministic_and_diagnosable() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = siggame(&["simulate", "--config", &scenario("table4.json"), "--seed", "9", "--steps", "80", "--out", out.to_str().unwrap()]);
        assert!(o.status.success());
    }
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    let text = String::from_utf8(bytes).unwrap();
    assert!(text.starts_with("k,state,action_b,action_m,applied_action,reaction,belief_m,bayes_coeff,agreement\n"));
    assert_eq!(text.lines().count(), 81);

    let o = siggame(&["diagnose", "--in", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 2);
    assert_eq!(v[0]["convergence"]["window"], 20);
    assert_eq!(v[0]["convergence"], v[1]["convergence"]);
}

#[test]
fn batch_summary_and_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("runs");
    let run = |threads: &str, out: &str| {
        let o = siggame(&[
            "batch", "--config", &scenario("table1.json"), "--episodes", "6", "--seed", "4", "--steps", "60",
            "--threads", threads, "--out-dir", out,
        ]);
        assert!(o.status.success());
        stdout(&o)
    };
    let one = run("1", out.to_str().unwrap());
    let v: serde_json::Value = serde_json::from_str(&one).unwrap();
    assert_eq!(v["n_episodes"], 6);
    assert_eq!(v["episodes"].as_array().unwrap().len(), 6);
    assert_eq!(std::fs::read_dir(&out).unwrap().count(), 6);
    let other = dir.path().join("runs4");
    assert_eq!(run("4", other.to_str().unwrap()), one);
    for i in 0..6 {
        let name = format!("episode_{i:05}.csv");
        assert_eq!(std::fs::read(out.join(&name)).unwrap(), std::fs::read(other.join(&name)).unwrap());
    }
}

#[test]
fn missing_config_fails_cleanly() {
    let o = siggame(&["simulate", "--config", "/nonexistent.json", "--seed", "1"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}
