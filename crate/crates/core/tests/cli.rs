use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use solenoid::verify::{comparable, max_scalar_difference};

fn solenoid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_solenoid"))
        .args(args)
        .env_remove("SOLENOID_SEED")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn read_json(path: &str) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn gen_and_check_div() {
    let dir = tempfile::tempdir().unwrap();
    let (lp, sp, dp) = (p(dir.path(), "loop.json"), p(dir.path(), "seg.json"), p(dir.path(), "div.json"));
    assert_eq!(code(&solenoid(&["gen", "--scenario", "loop", "--out", &lp])), 0);
    assert_eq!(code(&solenoid(&["gen", "--scenario", "segment", "--out", &sp, "--div", &dp])), 0);
    let mu = solenoid::AtomicCharge::read(&lp).unwrap();
    assert_eq!(mu.len(), 512);

    assert_eq!(code(&solenoid(&["check-div", "--charge", &lp])), 0);
    assert_eq!(code(&solenoid(&["check-div", "--charge", &sp])), 1);
    // loops have no atomic divergence to write
    assert_eq!(code(&solenoid(&["gen", "--scenario", "loop", "--out", &lp, "--div", &dp])), 2);
}

#[test]
fn usage_and_input_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&solenoid(&["gen", "--scenario", "spiral", "--out", "x.json"])), 2);
    assert_eq!(code(&solenoid(&["frobnicate"])), 2);
    assert_eq!(code(&solenoid(&["decompose"])), 2);

    let bad = p(dir.path(), "bad.json");
    std::fs::write(&bad, "{\"dim\": 2, \"atoms\": [{\"x\": [0.0, ").unwrap();
    let out = solenoid(&["check-div", "--charge", &bad]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("parse error"));
    assert_eq!(code(&solenoid(&["check-div", "--charge", &p(dir.path(), "missing.json")])), 3);

    // well-formed file, inconsistent content
    std::fs::write(&bad, r#"{"dim": 2, "atoms": [{"x": [0.0], "w": [1.0, 0.0]}]}"#).unwrap();
    assert_eq!(code(&solenoid(&["check-div", "--charge", &bad])), 3);

    let lp = p(dir.path(), "loop.json");
    assert_eq!(code(&solenoid(&["gen", "--scenario", "loop", "--out", &lp])), 0);
    // ell/step not an integer
    assert_eq!(code(&solenoid(&["decompose", "--charge", &lp, "--step", "0.3"])), 2);
}

#[test]
fn decompose_outputs_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let lp = p(d, "loop.json");
    assert_eq!(code(&solenoid(&["gen", "--scenario", "loop", "--atoms", "128", "--out", &lp])), 0);
    let run = |threads: &str, tag: &str| {
        let out = solenoid(&[
            "--threads", threads, "decompose", "--charge", &lp, "--curves", "200", "--step", "0.01", "--seed", "5",
            "--out", &p(d, &format!("nu{tag}.json")), "--report", &p(d, &format!("r{tag}.json")),
            "--csv", &p(d, &format!("nu{tag}.csv")),
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    };
    run("1", "a");
    run("1", "b");
    run("3", "c");

    let (a, b, c) = (read_json(&p(d, "ra.json")), read_json(&p(d, "rb.json")), read_json(&p(d, "rc.json")));
    assert_eq!(comparable(&a), comparable(&b));
    assert_eq!(max_scalar_difference(&comparable(&a), &comparable(&c)), Some(0.0));
    assert_eq!(code(&solenoid(&["report", &p(d, "ra.json"), "--compare", &p(d, "rb.json")])), 0);
    assert_eq!(code(&solenoid(&["report", &p(d, "ra.json"), "--compare", &p(d, "rc.json")])), 0);

    let nu = solenoid::CurveEnsemble::read(p(d, "nua.json")).unwrap();
    assert_eq!(nu.len(), 200);
    assert_eq!(nu, solenoid::CurveEnsemble::read(p(d, "nuc.json")).unwrap());
    let csv = std::fs::read_to_string(p(d, "nua.csv")).unwrap();
    assert!(csv.starts_with("curve,sample,t,weight,x0,x1"));
    assert_eq!(csv.lines().count(), 1 + 200 * 101);

    // a different seed changes the report
    let other = solenoid(&[
        "decompose", "--charge", &lp, "--curves", "200", "--step", "0.01", "--seed", "6", "--report", &p(d, "rd.json"),
    ]);
    assert_eq!(code(&other), 0);
    assert_eq!(code(&solenoid(&["report", &p(d, "ra.json"), "--compare", &p(d, "rd.json")])), 1);
}

#[test]
fn seed_environment_variable_wins() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let lp = p(d, "loop.json");
    assert_eq!(code(&solenoid(&["gen", "--scenario", "loop", "--atoms", "64", "--out", &lp])), 0);
    let args = |seed: &str, report: &str| {
        vec![
            "decompose".to_string(), "--charge".into(), lp.clone(), "--curves".into(), "50".into(), "--step".into(),
            "0.05".into(), "--seed".into(), seed.into(), "--report".into(), p(d, report),
        ]
    };
    let with_env = Command::new(env!("CARGO_BIN_EXE_solenoid"))
        .args(args("1", "env.json"))
        .env("SOLENOID_SEED", "9")
        .output()
        .unwrap();
    assert_eq!(code(&with_env), 0);
    let direct = solenoid(&args("9", "direct.json").iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(code(&direct), 0);
    assert_eq!(comparable(&read_json(&p(d, "env.json"))), comparable(&read_json(&p(d, "direct.json"))));

    let broken = Command::new(env!("CARGO_BIN_EXE_solenoid"))
        .args(args("1", "x.json"))
        .env("SOLENOID_SEED", "nine")
        .output()
        .unwrap();
    assert_eq!(code(&broken), 2);
}

#[test]
fn lift_decompose_command() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (sp, dp) = (p(d, "seg.json"), p(d, "div.json"));
    assert_eq!(code(&solenoid(&["gen", "--scenario", "segment", "--out", &sp, "--div", &dp])), 0);
    let out = solenoid(&[
        "lift-decompose", "--charge", &sp, "--div", &dp, "--curves", "200", "--step", "0.02", "--column-atoms", "16",
        "--out", &p(d, "nu.json"), "--report", &p(d, "r.json"),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_json(&p(d, "r.json"));
    assert_eq!(r["command"], "lift-decompose");
    assert_eq!(r["report"]["lifted_atoms"], 2 * 64 + 2 * 16);

    // the reversed dipole is not the divergence of the segment
    let mut flipped = solenoid::ScalarAtomicMeasure::read(&dp).unwrap().atoms().to_vec();
    flipped.iter_mut().for_each(|a| a.mass = -a.mass);
    let wrong = p(d, "wrong.json");
    solenoid::ScalarAtomicMeasure::new(2, flipped).unwrap().write(&wrong).unwrap();
    let out = solenoid(&["lift-decompose", "--charge", &sp, "--div", &wrong, "--curves", "10", "--step", "0.05"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("not certified"));
}

#[test]
fn verify_command_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = p(d, "cfg.json");
    std::fs::write(&cfg, r#"{"only": [1, 2, 9], "polylines": 4, "drift_probes": 500}"#).unwrap();
    let rep = p(d, "verify.json");
    let out = solenoid(&["verify", "--config", &cfg, "--report", &rep]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 3);

    let out = solenoid(&["verify", "--config", &cfg, "--tolerance-scale", "0"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stdout).contains("failing checks:"));

    assert_eq!(code(&solenoid(&["report", &rep])), 0);
    let rep2 = p(d, "verify2.json");
    assert_eq!(code(&solenoid(&["verify", "--config", &cfg, "--report", &rep2])), 0);
    assert_eq!(code(&solenoid(&["report", &rep, "--compare", &rep2])), 0);

    std::fs::write(&cfg, "{\"only\": [1,").unwrap();
    assert_eq!(code(&solenoid(&["verify", "--config", &cfg])), 3);
    assert_eq!(code(&solenoid(&["verify", "--only", "13"])), 2);
}
