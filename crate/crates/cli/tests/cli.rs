use std::io::Write;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_dpnormci"));
    c.env_remove("DPNORMCI_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn data_file(n: usize, header: bool) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    if header {
        writeln!(f, "value").unwrap();
    }
    // deterministic, roughly standard-normal spread around 0.5
    for i in 0..n {
        let u = (i as f64 + 0.5) / n as f64;
        let x = 0.5 + 1.7 * (u - 0.5) * (1.0 + (u - 0.5).abs());
        writeln!(f, "{x}").unwrap();
    }
    f
}

fn path(f: &tempfile::NamedTempFile) -> &str {
    f.path().to_str().unwrap()
}

#[test]
fn ci_known_releases_report() {
    let f = data_file(10_000, false);
    let args = [
        "ci-known", "--input", path(&f), "--sigma", "1", "--epsilon", "0.5", "--delta", "0", "--alpha", "0.05",
        "--range-r", "100", "--split", "finite-sample", "--seed", "42",
    ];
    let v = json(&run(&args));
    assert_eq!(v["gate_passed"], true);
    assert_eq!(v["seed"], 42);
    assert_eq!(v["interval"]["trivial"], false);
    let (lo, hi) = (v["interval"]["lo"].as_f64().unwrap(), v["interval"]["hi"].as_f64().unwrap());
    assert!(lo < 0.5 && 0.5 < hi);
    // same seed, same bytes
    assert_eq!(run(&args).stdout, run(&args).stdout);
}

#[test]
fn seed_comes_from_environment_unless_given() {
    let f = data_file(10_000, false);
    let base = ["ci-known", "--input", path(&f), "--sigma", "1", "--epsilon", "1", "--range-r", "10"];
    let from_env = bin().args(base).env("DPNORMCI_SEED", "7").output().unwrap();
    assert_eq!(json(&from_env)["seed"], 7);
    let mut with_flag = base.to_vec();
    with_flag.extend(["--seed", "9"]);
    let overridden = bin().args(&with_flag).env("DPNORMCI_SEED", "7").output().unwrap();
    assert_eq!(json(&overridden)["seed"], 9);
}

#[test]
fn gate_failure_is_trivial_or_exit_3() {
    let f = data_file(50, true);
    let base = ["ci-known", "--input", path(&f), "--header", "--sigma", "1", "--epsilon", "0.5", "--range-r", "10"];
    let v = json(&run(&base));
    assert_eq!(v["gate_passed"], false);
    assert_eq!(v["interval"]["lo"], -10.0);
    assert_eq!(v["width"], 20.0);
    let mut strict = base.to_vec();
    strict.push("--strict-gate");
    let out = run(&strict);
    assert_eq!(out.status.code(), Some(3));
    assert!(out.stdout.is_empty());

    let out = run(&["range-known", "--input", path(&f), "--header", "--sigma", "1", "--epsilon", "0.5", "--range-r", "10"]);
    let v = json(&out);
    assert_eq!(v["gate"]["passed"], false);
    assert!(v["range"].is_null());
}

#[test]
fn trivial_interval_with_unbounded_range_serializes() {
    let f = data_file(50, false);
    let v = json(&run(&["ci-known", "--input", path(&f), "--sigma", "1", "--epsilon", "0.5", "--delta", "1e-6"]));
    assert_eq!(v["interval"]["lo"], "-inf");
    assert_eq!(v["interval"]["hi"], "inf");
}

#[test]
fn validation_errors_exit_2() {
    let f = data_file(100, false);
    let cases: &[&[&str]] = &[
        &["ci-known", "--input", path(&f), "--sigma", "1", "--epsilon", "-1"],
        &["ci-known", "--input", path(&f), "--sigma", "1", "--epsilon", "1", "--alpha", "0.7"],
        // pure DP with an unbounded range
        &["ci-known", "--input", path(&f), "--sigma", "1", "--epsilon", "1"],
        &["ci-known", "--input", "/nonexistent.csv", "--sigma", "1", "--epsilon", "1"],
        &["ci-known", "--sigma", "1", "--epsilon", "1"],
        &["no-such-command"],
        &["lower-bound", "--sigma", "1", "--epsilon", "1", "--n", "100", "--range-r", "nan"],
    ];
    for args in cases {
        let out = run(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
        assert!(out.stdout.is_empty());
    }
}

#[test]
fn parse_errors_name_the_line() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    write!(f, "1.0\n2.0\nabc\n").unwrap();
    let out = run(&["ci-known", "--input", path(&f), "--sigma", "1", "--epsilon", "1", "--range-r", "10"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn reads_stdin() {
    let mut child = bin()
        .args(["range-known", "--input", "-", "--sigma", "1", "--epsilon", "1", "--range-r", "10"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let body: String = (0..6000).map(|i| format!("{}\n", (i % 7) as f64 * 0.1)).collect();
    child.stdin.take().unwrap().write_all(body.as_bytes()).unwrap();
    let v = json(&child.wait_with_output().unwrap());
    assert_eq!(v["gate"]["passed"], true);
    assert_eq!(v["range"]["l_hat"], 0);
}

#[test]
fn lower_bound_matches_closed_form() {
    let v = json(&run(&["lower-bound", "--sigma", "1", "--epsilon", "1", "--n", "100", "--alpha", "0.05", "--range-r", "10"]));
    let w = v["width_floor"].as_f64().unwrap();
    assert!((w - 5f64.ln() / 2400.0).abs() < 1e-15);
    assert_eq!(v["binding_branch"], "privacy_term");
}

#[test]
fn unknown_variance_commands() {
    let f = data_file(400, false);
    let bounds = ["--range-r", "10", "--sigma-min", "0.1", "--sigma-max", "10"];
    for cmd in ["ci-unknown", "range-unknown"] {
        let mut args = vec![cmd, "--input", path(&f), "--epsilon", "1"];
        args.extend(bounds);
        let out = run(&args);
        assert_eq!(out.status.code(), Some(0), "{cmd}");
    }
    let v = json(&run(&["estimate-sigma", "--input", path(&f), "--epsilon", "1", "--sigma-min", "0.1", "--sigma-max", "10"]));
    assert_eq!(v["gate"]["passed"], false);
    assert!(v["sigma"].is_null());
}

#[test]
fn simulate_and_audit() {
    let v = json(&run(&[
        "simulate", "--scenario", "coverage-unknown", "--mu", "-0.5", "--n", "400", "--trials", "30", "--epsilon", "0.5",
        "--range-r", "10", "--sigma-min", "0.1", "--sigma-max", "10",
    ]));
    // far below the gate: every trial is the trivial interval
    assert_eq!(v["trivial_trials"], 30);
    assert_eq!(v["empirical_rate"], 1.0);
    let v = json(&run(&[
        "simulate", "--scenario", "histogram-accuracy", "--n", "3000", "--trials", "20", "--epsilon", "1",
        "--probs", "0.1,0.2,0.3,0.4", "--beta", "0.05",
    ]));
    assert_eq!(v["trials"], 20);
    let out = run(&["simulate", "--scenario", "histogram-accuracy", "--n", "10", "--trials", "1", "--epsilon", "1"]);
    assert_eq!(out.status.code(), Some(2));

    let v = json(&run(&["dp-audit", "--epsilon", "0.5", "--n", "100", "--w0", "8", "--seed", "1"]));
    assert_eq!(v["pass"], true);
    assert_eq!(v["scale_checks"][0]["recorded"][0], 0.16);
}
