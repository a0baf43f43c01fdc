use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use asyncopt_cli::{run_experiment, sweep, ExperimentConfig};

fn asyncopt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_asyncopt"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn small(out: &Path) -> Vec<String> {
    [
        "--set",
        "samples=80",
        "--set",
        "features=12",
        "--horizon",
        "400",
        "--trials",
        "4",
        "--out",
    ]
    .iter()
    .map(|s| s.to_string())
    .chain([out.display().to_string()])
    .collect()
}

fn run_with(extra: &[&str], out: &Path) -> Output {
    let mut args: Vec<String> = vec!["run".into()];
    args.extend(small(out));
    args.extend(extra.iter().map(|s| s.to_string()));
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    asyncopt(&refs)
}

#[test]
fn run_writes_artifacts_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with(&[], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["config.txt", "delays.csv", "trace.csv", "bound.csv", "summary.txt"] {
        assert!(dir.path().join(f).exists(), "missing {f}");
    }
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 402);
    let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(summary.contains("[paper]") && summary.contains("[derived]") && summary.contains("[config]"));
}

#[test]
fn bcd_run_writes_trial_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with(&["--engine", "bcd", "--problem", "lasso", "--blocks", "4"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trials = fs::read_dir(dir.path().join("trials")).unwrap().count();
    assert_eq!(trials, 4);
}

#[test]
fn bad_parameters_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_with(&["--a", "1.5"], dir.path()).status.code(), Some(2));
    assert_eq!(run_with(&["--h", "1.0"], dir.path()).status.code(), Some(2));
    assert_eq!(run_with(&["--set", "nonsense=1"], dir.path()).status.code(), Some(2));
    assert_eq!(asyncopt(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn inadmissible_constant_step_exits_three_unless_overridden() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "--set",
        "schedule=constant:100",
        "--delay",
        "adversarial",
        "--a",
        "0.5",
        "--b",
        "1",
        "--c",
        "1",
    ];
    let out = run_with(&args, dir.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[admissibility]"));
    let mut forced = args.to_vec();
    forced.push("--override-admissibility");
    let out = run_with(&forced, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn missing_config_file_is_reported() {
    let out = asyncopt(&["run", "--config", "/nonexistent/cfg.txt"]);
    assert_eq!(out.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let out = asyncopt(&[
        "validate-delays",
        "--file",
        dir.path().join("none.csv").to_str().unwrap(),
        "--a",
        "0.5",
        "--b",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn build_then_validate_adversarial_delays() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("adv.csv");
    let f = file.to_str().unwrap();
    let out = asyncopt(&[
        "build-adversarial",
        "--a",
        "0.5",
        "--b",
        "1",
        "--horizon",
        "100",
        "--out",
        f,
    ]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("[0, 1, 3, 7, 15, 31, 63]"), "{stdout}");
    assert_eq!(
        asyncopt(&["validate-delays", "--file", f, "--a", "0.5", "--b", "1"])
            .status
            .code(),
        Some(0)
    );
    // A tighter bound rejects the same sequence.
    let out = asyncopt(&["validate-delays", "--file", f, "--a", "0.1", "--b", "1"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL at k ="));
}

#[test]
fn check_admissibility_verb() {
    let ok = asyncopt(&[
        "check-admissibility",
        "--a",
        "0.5",
        "--b",
        "1",
        "--c",
        "1",
        "--horizon",
        "2000",
    ]);
    assert_eq!(ok.status.code(), Some(0));
    let st = asyncopt(&[
        "check-admissibility",
        "--a",
        "0.9",
        "--b",
        "0.6",
        "--kind",
        "stochastic",
        "--components",
        "5",
        "--horizon",
        "2000",
    ]);
    assert_eq!(st.status.code(), Some(0));
}

#[test]
fn file_delays_are_used_and_validated() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("d.csv");
    let f = file.to_str().unwrap();
    asyncopt(&[
        "build-adversarial",
        "--a",
        "0.5",
        "--b",
        "1",
        "--horizon",
        "400",
        "--out",
        f,
    ]);
    let out_dir = dir.path().join("run");
    let out = run_with(&["--delay", f, "--a", "0.5", "--b", "1", "--batches", "1"], &out_dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run_with(&["--delay", f, "--a", "0.1", "--b", "1", "--batches", "1"], &out_dir);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[validate]"));
}

#[test]
fn config_file_and_flags_compose() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.txt");
    fs::write(
        &cfg,
        "# small run\nsamples = 60\nfeatures = 10\nhorizon = 300\nb = 0.6\n",
    )
    .unwrap();
    let out_dir = dir.path().join("o");
    let out = asyncopt(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--b",
        "1",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let written = fs::read_to_string(out_dir.join("config.txt")).unwrap();
    let parsed = ExperimentConfig::parse_str(&written).unwrap();
    assert_eq!(parsed.b, 1.0);
    assert_eq!(parsed.horizon, 300);
    assert_eq!(parsed.samples, 60);
}

#[test]
fn singleton_sweep_matches_a_plain_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig {
        samples: 80,
        features: 12,
        horizon: 300,
        output: dir.path().join("plain"),
        ..ExperimentConfig::default()
    };
    let plain = run_experiment(&cfg).unwrap();
    cfg.output = dir.path().join("sweep");
    let swept = sweep(&cfg, &[cfg.b]).unwrap();
    assert_eq!(swept.runs[0].trace, plain.trace);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for engine in ["piag", "bcd"] {
        let a = dir.path().join(format!("{engine}_a"));
        let b = dir.path().join(format!("{engine}_b"));
        for d in [&a, &b] {
            let out = run_with(&["--engine", engine, "--problem", "lasso", "--blocks", "3"], d);
            assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        }
        for f in ["trace.csv", "delays.csv", "bound.csv"] {
            assert_eq!(
                fs::read(a.join(f)).unwrap(),
                fs::read(b.join(f)).unwrap(),
                "{engine} {f}"
            );
        }
    }
}
