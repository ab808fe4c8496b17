use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;
use tempfile::TempDir;

const SINGLET: &str = r#"{"kind":"singlet","settings_alice":[[1,0],[0,1]],"settings_bob":[[-0.7071067811865476,-0.7071067811865476],[-0.7071067811865476,0.7071067811865476]]}"#;
const SIGN_LHV: &str = r#"{"kind":"sign_lhv","settings_alice":[[1,0],[0,1]],"settings_bob":[[-0.7071067811865476,-0.7071067811865476],[-0.7071067811865476,0.7071067811865476]]}"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bellkit"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn run_stdin(args: &[&str], input: &[u8]) -> Output {
    let mut child =
        bin().args(args).stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped()).spawn().unwrap();
    child.stdin.take().unwrap().write_all(input).unwrap();
    child.wait_with_output().unwrap()
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn ok_json(out: &Output) -> Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn simulate_is_well_formed_and_deterministic() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.json", SINGLET);
    let a = run(&["simulate", "--model", s(&m), "--trials", "10", "--seed", "3"]);
    let b = run(&["simulate", "--model", s(&m), "--trials", "10", "--seed", "3"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert_eq!(text.lines().count(), 10);
    for line in text.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert!(v["i"].is_u64() && v["a"].is_u64() && v["b"].is_u64());
        assert!(v["x"] == 1 || v["x"] == -1);
    }
}

#[test]
fn invalid_model_is_reported() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.json", r#"{"kind":"singlet","settings_alice":"nope"}"#);
    let out = run(&["simulate", "--model", s(&m), "--trials", "10"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid model"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["analyze", "--keys", "1,2"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn pipeline_equals_staged_files() {
    let dir = TempDir::new().unwrap();
    let m = write(&dir, "m.json", SINGLET);
    let (log, lossy, rep) = (dir.path().join("log.jsonl"), dir.path().join("lossy.jsonl"), dir.path().join("rep.json"));
    assert!(run(&["simulate", "--model", s(&m), "--trials", "4000", "--out", s(&log)]).status.success());
    assert!(run(&["inject", "--input", s(&log), "--eta", "0.8", "--out", s(&lossy)]).status.success());
    assert!(run(&["analyze", "--input", s(&lossy), "--out", s(&rep)]).status.success());

    let sim = run(&["simulate", "--model", s(&m), "--trials", "4000"]);
    let inj = run_stdin(&["inject", "--eta", "0.8"], &sim.stdout);
    let ana = run_stdin(&["analyze"], &inj.stdout);
    assert_eq!(std::fs::read(&log).unwrap(), sim.stdout);
    assert_eq!(std::fs::read(&lossy).unwrap(), inj.stdout);
    assert_eq!(std::fs::read(&rep).unwrap(), ana.stdout);
}

fn chsh_values(report: &Value) -> Vec<(String, f64)> {
    report["chsh"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| (c["selection"].as_str().unwrap().to_string(), c["value"].as_f64().unwrap()))
        .collect()
}

#[test]
fn analyze_singlet_and_lhv_logs() {
    let dir = TempDir::new().unwrap();
    let q = write(&dir, "q.json", SINGLET);
    let sim = run(&["simulate", "--model", s(&q), "--trials", "100000"]);
    let rep = ok_json(&run_stdin(&["analyze"], &sim.stdout));
    let standard = chsh_values(&rep).into_iter().find(|(k, _)| k.ends_with("+++-")).unwrap().1;
    assert!((standard - 2.828).abs() < 0.03, "{standard}");
    assert_eq!(chsh_values(&rep).len(), 8);
    assert_eq!(rep["ch"].as_array().unwrap().len(), 4);
    assert!(rep["martingale_p"].as_f64().unwrap() < 1e-10);
    assert_eq!(rep["lhv_representable"], false);
    assert!(!rep["tests"].as_array().unwrap().is_empty());

    let lhv = write(&dir, "lhv.json", SIGN_LHV);
    let sim = run(&["simulate", "--model", s(&lhv), "--trials", "100000"]);
    let rep = ok_json(&run_stdin(&["analyze"], &sim.stdout));
    let sigma = 4.0 * (4.0f64 / 25_000.0).sqrt();
    for (sel, v) in chsh_values(&rep) {
        assert!(v <= 2.0 + sigma, "{sel}: {v}");
    }
    let csv = run_stdin(&["analyze", "--format", "csv"], &sim.stdout);
    assert!(String::from_utf8(csv.stdout).unwrap().starts_with("i,j,npp,npm,nmp,nmm,e\n"));
}

#[test]
fn empty_and_malformed_logs() {
    let out = run_stdin(&["analyze"], b"");
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("no data"));

    let out = run_stdin(&["analyze"], b"{\"i\":0,\"a\":1,\"b\":1,\"x\":1,\"y\":1}\n{broken\n");
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn table_rows() {
    let out = run(&["table"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("n,s_max\n"));
    for row in ["2,2.828427", "5,3.697653", "10,3.959522", "20,3.999066"] {
        assert!(text.lines().any(|l| l == row), "{row}");
    }
    assert_eq!(text.lines().count(), 13);
    let json = ok_json(&run(&["table", "--format", "json"]));
    assert_eq!(json.as_array().unwrap().len(), 12);
}

#[test]
fn scans() {
    let out = run(&["scan", "--n", "2", "--points", "5"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("gamma,s_n"));
    let row: Vec<f64> = lines.nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert!((row[0] - std::f64::consts::FRAC_PI_4).abs() < 1e-9);
    assert!((row[1] - 2.0 * 2f64.sqrt()).abs() < 1e-9);

    let out = run(&["scan", "--threshold", "--r", "1", "--points", "3", "--eta-min", "0.8", "--eta-max", "0.9"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("eta,max_violation\n"));
    let vals: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(vals[0] < 0.0 && vals[2] > 0.0, "{vals:?}");
}

#[test]
fn plots() {
    let dir = TempDir::new().unwrap();
    let svg = dir.path().join("h.svg");
    assert!(run(&["plot", "hcurves", "--out", s(&svg)]).status.success());
    let body = std::fs::read_to_string(&svg).unwrap();
    assert!(body.starts_with("<svg") && body.matches("<polyline").count() == 5);

    let out = run(&["plot", "scurve", "--dims", "2"]);
    assert!(out.status.success());

    let m = write(&dir, "loop.json", r#"{"kind":"loop_of_four","n":2,"random_keys":[30,30]}"#);
    let out = run(&["plot", "fig6", "--model", s(&m)]);
    assert!(String::from_utf8(out.stdout).unwrap().contains("900 key pairs"));

    let plain = dir.path().join("plain.jsonl");
    assert!(run(&["simulate", "--model", s(&m), "--trials", "20000", "--out", s(&plain)]).status.success());
    let out = run(&["plot", "fig9", "--input", s(&plain), "--pair", "10,15"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--trace"));

    let traced = dir.path().join("traced.jsonl");
    assert!(run(&["simulate", "--model", s(&m), "--trials", "200000", "--trace", "--out", s(&traced)])
        .status
        .success());
    let fig = dir.path().join("fig9.svg");
    assert!(run(&["plot", "fig9", "--input", s(&traced), "--pair", "10,15", "--out", s(&fig)]).status.success());
    let body = std::fs::read_to_string(&fig).unwrap();
    assert!(body.matches("<circle").count() > 100);
    assert!(body.len() < 2 << 20);
}

#[test]
fn nogo_verdicts() {
    let dir = TempDir::new().unwrap();
    let t = dir.path().join("t.jsonl");
    let v =
        ok_json(&run(&["nogo", "--alice", "sign-lhv", "--bob", "sign-lhv", "--trials", "2000", "--transcript", s(&t)]));
    assert_eq!(v["local_bound_respected"], true);
    let rep = ok_json(&run(&["analyze", "--input", s(&t)]));
    assert_eq!(rep["n_trials"], 2000);

    let out = run(&["nogo", "--trials", "100", "--fault-setting-before-share", "17"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trial 17"));

    let out = run(&["nogo", "--alice", "telepathy"]);
    assert_eq!(out.status.code(), Some(1));

    let list = String::from_utf8(run(&["nogo", "--list"]).stdout).unwrap();
    assert!(list.lines().any(|l| l == "memory:count-steering"));
}

#[test]
fn manifest_runs() {
    let dir = TempDir::new().unwrap();
    write(&dir, "m.json", SINGLET);
    let man = write(
        &dir,
        "run.json",
        r#"{"model":"m.json","k":2,"l":2,"n_trials":500,"seed":9,"out":"log.jsonl",
            "inject":[{"kind":"detection","eta_a":0.9,"eta_b":0.8},
                      {"kind":"coincidence","jitter":0.01,"window":0.05,"pairing":"fixed-slots"}]}"#,
    );
    let out = run(&["simulate", "--manifest", s(&man)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let log = std::fs::read_to_string(dir.path().join("log.jsonl")).unwrap();
    assert!(log.lines().count() > 300 && log.lines().count() < 500);
    assert!(log.contains("\"ta\""));

    let bad = write(&dir, "bad.json", r#"{"model":"missing.json","n_trials":5}"#);
    let out = run(&["simulate", "--manifest", s(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("does not exist"));
    let zero = write(&dir, "zero.json", r#"{"model":"m.json","n_trials":0}"#);
    assert_eq!(run(&["simulate", "--manifest", s(&zero)]).status.code(), Some(1));
}
