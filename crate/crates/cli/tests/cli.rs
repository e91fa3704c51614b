use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fadyn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fadyn"))
        .arg("--output")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn manifest(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

#[test]
fn midpoint_auto_eta() {
    let dir = tempfile::tempdir().unwrap();
    let out = fadyn(dir.path(), &["simulate", "midpoint", "--d", "2", "--lambda", "3", "--eta", "auto", "--steps", "200"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("midpoint.csv")).unwrap();
    assert!(csv.starts_with("t,x,y,product,abs_error,bound\n"));
    assert_eq!(csv.lines().count(), 202);
    let m = manifest(dir.path(), "midpoint.json");
    assert!(m["spec_version"].is_string());
    let eta = m["params"]["eta"].as_f64().unwrap();
    assert!((eta - 0.9 * m["budget"]["eta_max"].as_f64().unwrap()).abs() < 1e-15);
    assert_eq!(m["q_fit_within_q_theory_plus_0.02"], Value::Bool(true));
    let leftovers: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(leftovers.len(), 2, "{leftovers:?}");
}

#[test]
fn aligned_scalar_ode_reaches_signal() {
    let dir = tempfile::tempdir().unwrap();
    let out = fadyn(
        dir.path(),
        &["simulate", "scalar-ode", "--d", "2", "--lambda", "3", "--theta0", "0", "--scheme-k0", "--t-end", "10"],
    );
    assert!(out.status.success());
    let m = manifest(dir.path(), "scalar-ode.json");
    assert!((m["final"]["product"].as_f64().unwrap() - 3.0).abs() < 1e-10);
    assert_eq!(m["params"]["k"].as_f64().unwrap(), 0.0);
    let rate = m["fitted_rate"]["rate"].as_f64().unwrap();
    assert!((rate / m["theoretical_rate"]["rate"].as_f64().unwrap() - 1.0).abs() < 0.05);
}

#[test]
fn deep_and_euler_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = fadyn(dir.path(), &["simulate", "deep-ode", "--lambda", "1", "--d", "2,2.5", "--t-end", "20", "--every", "100"]);
    assert!(out.status.success());
    let m = manifest(dir.path(), "deep-ode.json");
    assert!(m["power_relation_deviation"].as_f64().unwrap() < 1e-6);
    let out = fadyn(dir.path(), &["simulate", "euler", "--d", "1", "--lambda", "1", "--steps", "500"]);
    assert!(out.status.success());
    let m = manifest(dir.path(), "euler.json");
    assert_eq!(m["region_violation"], Value::Null);
    assert_eq!(m["within_budget"], Value::Bool(true));
    let out = fadyn(dir.path(), &["simulate", "midpoint-deep", "--lambda", "1", "--d", "2,2.5", "--steps", "300"]);
    assert!(out.status.success());
}

#[test]
fn missing_flag_prints_usage() {
    let dir = tempfile::tempdir().unwrap();
    let out = fadyn(dir.path(), &["simulate", "euler", "--lambda", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn divergence_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = fadyn(dir.path(), &["simulate", "euler", "--d", "1", "--lambda", "1", "--eta", "5", "--steps", "1000"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bounds_examples() {
    let dir = tempfile::tempdir().unwrap();
    let e = stdout_json(&fadyn(dir.path(), &["bounds", "euler", "--d", "1", "--lambda", "1"]));
    assert!((e["eta_max"].as_f64().unwrap() - 0.0917).abs() < 1e-4);
    assert!((e["s_star"].as_f64().unwrap() - 1.6956).abs() < 1e-4);
    let m = stdout_json(&fadyn(dir.path(), &["bounds", "midpoint", "--d", "0.5", "--lambda", "1"]));
    assert!((m["eta_max"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-15);
    let deep = stdout_json(&fadyn(dir.path(), &["bounds", "midpoint-deep", "--L", "2", "--d", "2"]));
    let two = stdout_json(&fadyn(dir.path(), &["bounds", "midpoint", "--d", "2", "--lambda", "1"]));
    for key in ["eta_max", "m", "q_theory"] {
        let (a, b) = (deep[key].as_f64().unwrap(), two[key].as_f64().unwrap());
        assert!((a / b - 1.0).abs() < 1e-12, "{key}: {a} vs {b}");
    }
    let bad = fadyn(dir.path(), &["bounds", "midpoint", "--d", "-1", "--lambda", "1"]);
    assert_eq!(bad.status.code(), Some(2));
    let bad = fadyn(dir.path(), &["bounds", "midpoint-deep", "--L", "3", "--d", "2"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn implicit_reg_commands() {
    let dir = tempfile::tempdir().unwrap();
    let out = fadyn(dir.path(), &["implicit-reg", "--roots", "-2,1,2", "--delta", "30", "--side", "above"]);
    assert!(out.status.success());
    let m = manifest(dir.path(), "implicit-reg.json");
    let t = m["components"][0]["t_detected"].as_f64().unwrap();
    assert!((t / (2.0 / 3.0) - 1.0).abs() < 0.05);
    assert!(dir.path().join("implicit-reg.csv").exists());

    let out = fadyn(dir.path(), &["implicit-reg", "--d", "2", "--k0", "--theta0", "-5", "--lambdas", "10,3,1"]);
    assert!(out.status.success());
    let times: Vec<f64> = stdout_json(&out)["ordering"]["times"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!(times.windows(2).all(|w| w[1] > w[0]), "{times:?}");

    let out = fadyn(dir.path(), &["implicit-reg", "--roots", "-2,1,2", "--delta", "800"]);
    assert_eq!(out.status.code(), Some(2));
    let out = fadyn(dir.path(), &["implicit-reg", "--d", "1", "--k", "1", "--lambdas", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn autoencoder_single_repeat_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["autoencoder", "--repeats", "1", "--steps", "50", "--seed", "4"];
    assert!(fadyn(dir.path(), &args).status.success());
    let first = std::fs::read(dir.path().join("autoencoder.csv")).unwrap();
    let text = String::from_utf8(first.clone()).unwrap();
    assert!(text.starts_with("step,metric,mean,std\n"));
    assert!(text.lines().skip(1).all(|l| l.ends_with(",0")));
    let m = manifest(dir.path(), "autoencoder.json");
    assert_eq!(m["data_seed"], 4);
    assert_eq!(m["seeds"], serde_json::json!([5]));
    assert!(fadyn(dir.path(), &args).status.success());
    assert_eq!(first, std::fs::read(dir.path().join("autoencoder.csv")).unwrap());
}

#[test]
fn autoencoder_three_layers() {
    let dir = tempfile::tempdir().unwrap();
    let out = fadyn(dir.path(), &["autoencoder", "--depth", "3", "--repeats", "2", "--steps", "100"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(manifest(dir.path(), "autoencoder.json")["config"]["depth"], 3);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[simulate.midpoint]\nd = 2.0\nlambda = 3.0\nsteps = 10\neta = \"auto\"\n").unwrap();
    let out = fadyn(dir.path(), &["--config", cfg.to_str().unwrap(), "simulate", "midpoint", "--steps", "20"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(manifest(dir.path(), "midpoint.json")["params"]["steps"], 20);

    std::fs::write(&cfg, "[autoencoder]\nrepeats = 1\nsteps = 5\nbogus = 1\n").unwrap();
    let out = fadyn(dir.path(), &["--config", cfg.to_str().unwrap(), "autoencoder"]);
    assert_eq!(out.status.code(), Some(2));
    std::fs::write(&cfg, "this is not toml [").unwrap();
    let out = fadyn(dir.path(), &["--config", cfg.to_str().unwrap(), "bounds", "midpoint", "--d", "1", "--lambda", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_filter_and_negative_control() {
    let dir = tempfile::tempdir().unwrap();
    let out = fadyn(dir.path(), &["verify", "--filter", "euler"]);
    let text = String::from_utf8_lossy(&out.stdout);
    let ids: Vec<&str> = text.lines().filter_map(|l| l.split_whitespace().nth(1)).filter(|w| w.starts_with('C')).collect();
    assert_eq!(ids, ["C04", "C05", "C15"]);

    let clean = fadyn(dir.path(), &["verify", "--filter", "6"]);
    assert_eq!(clean.status.code(), Some(0));
    let injected = fadyn(dir.path(), &["verify", "--filter", "6", "--inject-wrong-rate"]);
    assert_eq!(injected.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&injected.stdout).contains("FAIL C06"));
    assert!(String::from_utf8_lossy(&injected.stderr).contains("C06"));

    let none = fadyn(dir.path(), &["verify", "--filter", "nothing-matches"]);
    assert_eq!(none.status.code(), Some(2));
}
