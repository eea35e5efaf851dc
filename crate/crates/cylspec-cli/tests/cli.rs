//! End-to-end runs of the `cylspec` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn cylspec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cylspec"))
        .args(args)
        .env_remove("CYLSPEC_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("config.json");
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

const CIRCLE: &str = r#"{"schema":1,"operator":{"kind":"circle_dirac","data":{"n_modes":3,"shift":0}}}"#;

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), CIRCLE);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for out in [&a, &b] {
        let o = cylspec(&["verify", "calculus", "czech", "bc", "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    }
    for f in ["calculus.json", "czech.json", "bc.json", "summary.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let rep = json(&a.join("calculus.json"));
    assert_eq!(rep["schema"], 1);
    assert_eq!(rep["config_hash"].as_str().unwrap().len(), 64);
    assert!(rep["tolerances"]["exact"].is_number() && rep["epsilon"].is_number());
}

#[test]
fn seed_changes_reports() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), CIRCLE);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    cylspec(&["verify", "czech", "--config", &cfg, "--out", a.to_str().unwrap()]);
    cylspec(&["verify", "czech", "--config", &cfg, "--seed", "7", "--out", b.to_str().unwrap()]);
    assert_ne!(fs::read(a.join("czech.json")).unwrap(), fs::read(b.join("czech.json")).unwrap());
}

#[test]
fn malformed_configs_exit_two() {
    let tmp = TempDir::new().unwrap();
    for body in [
        "not json",
        r#"{"schema":1,"operator":{"kind":"diagonal","data":[1]},"surprise":true}"#,
        r#"{"schema":3,"operator":{"kind":"diagonal","data":[1]}}"#,
    ] {
        let cfg = write_config(tmp.path(), body);
        let o = cylspec(&["verify", "--config", &cfg, "--out", tmp.path().join("o").to_str().unwrap()]);
        assert_eq!(code(&o), 2, "{body}");
    }
    let o = cylspec(&["verify", "nonsense"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn mutations_exit_one() {
    let tmp = TempDir::new().unwrap();
    for (m, suite) in [("chi_zero_negative", "calculus"), ("eta_plateau", "cylinder"), ("adjoint_sigma", "bc")] {
        let body = format!(
            r#"{{"schema":1,"operator":{{"kind":"circle_dirac","data":{{"n_modes":3,"shift":0}}}},"mutation":"{m}"}}"#
        );
        let cfg = write_config(tmp.path(), &body);
        let out = tmp.path().join(m);
        let o = cylspec(&["verify", suite, "--config", &cfg, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 1, "{m}");
        let summary = json(&out.join("summary.json"));
        assert_eq!(summary["all_passed"], false);
        assert_eq!(summary["mutation"], m);
    }
}

#[test]
fn out_dir_falls_back_to_environment() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), CIRCLE);
    let env_dir = tmp.path().join("from_env");
    let o = Command::new(env!("CARGO_BIN_EXE_cylspec"))
        .args(["verify", "czech", "--config", &cfg])
        .env("CYLSPEC_OUT_DIR", &env_dir)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(env_dir.join("summary.json").is_file());
}

#[test]
fn fredholm_summary_carries_the_flagship_index() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), CIRCLE);
    let out = tmp.path().join("o");
    let o = cylspec(&["verify", "fredholm", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let summary = json(&out.join("summary.json"));
    assert_eq!(summary["index"], 2);
    assert_eq!(summary["oracle_index"], 2);
}

#[test]
fn index_command_prints_agreement() {
    let o = cylspec(&["index"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["report"]["index"], 2);
    assert_eq!(v["agrees"], true);
}

#[test]
fn callias_command_verdicts() {
    let pass = cylspec(&["callias", "--potential", "2*tanh(x)", "--K", "-2,2", "--Lambda", "0.5", "--gamma", "0"]);
    assert_eq!(code(&pass), 0, "{}", String::from_utf8_lossy(&pass.stderr));
    let fail = cylspec(&["callias", "--potential", "0.1", "--Lambda", "1"]);
    assert_eq!(code(&fail), 1);
    let tmp = TempDir::new().unwrap();
    let csv = tmp.path().join("v.csv");
    fs::write(&csv, "x,v\n-1,3\n0,3\n1,3\n").unwrap();
    let o = cylspec(&["callias", "--potential", csv.to_str().unwrap(), "--Lambda", "4"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["verdict"], true);
    assert_eq!(code(&cylspec(&["callias", "--potential", "missing.csv", "--Lambda", "1"])), 2);
}

#[test]
fn plot_tables() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), CIRCLE);
    let out = tmp.path().join("o");
    cylspec(&["verify", "calculus", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let report = out.join("calculus.json");
    let o = cylspec(&["plot", report.to_str().unwrap(), "rellich"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("j,singular_value"));
    assert!(lines.count() >= 8);
    let empty = cylspec(&["plot", report.to_str().unwrap(), "constants"]);
    assert_eq!(String::from_utf8(empty.stdout).unwrap(), "n_modes,nt,extension_constant,trace_constant\n");
    assert_eq!(code(&cylspec(&["plot", report.to_str().unwrap(), "spectrum"])), 2);
}
