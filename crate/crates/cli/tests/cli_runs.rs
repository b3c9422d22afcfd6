use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const FILES: [&str; 5] = [
    "beampattern.csv",
    "convergence.csv",
    "pd_summary.csv",
    "trace.csv",
    "config_resolved.toml",
];

fn rlbeam(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rlbeam"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) {
    let out = rlbeam(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        run_ok(&[
            "--scenario",
            "case1",
            "--runs",
            "2",
            "--seed",
            "7",
            "--k",
            "12",
            "--out",
            dir.to_str().unwrap(),
        ]);
    }
    for name in FILES {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
    let bp = read(&a, "beampattern.csv");
    assert_eq!(bp.lines().count(), 13);
    assert_eq!(bp.lines().next().unwrap().split(',').count(), 23);
    assert_eq!(read(&a, "trace.csv").lines().count(), 13);
    assert_eq!(read(&a, "convergence.csv").lines().count(), 13);
}

#[test]
fn case_2_spans_600_steps() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok(&[
        "--scenario",
        "case2",
        "--runs",
        "1",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    let bp = read(tmp.path(), "beampattern.csv");
    assert_eq!(bp.lines().count(), 601);
    assert!(bp.lines().last().unwrap().starts_with("600,"));
    // one summary row per (phase, target)
    assert_eq!(read(tmp.path(), "pd_summary.csv").lines().count(), 12);
}

#[test]
fn omni_baseline_reports_both_columns() {
    let tmp = tempfile::tempdir().unwrap();
    run_ok(&[
        "--scenario",
        "case1",
        "--baseline",
        "omni",
        "--runs",
        "2",
        "--k",
        "8",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    let summary = read(tmp.path(), "pd_summary.csv");
    let mut lines = summary.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let omni = header.iter().position(|&h| h == "omni").unwrap();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 4);
    for row in &rows {
        let pd: f64 = row[omni].parse().unwrap();
        assert!((0.0..=1.0).contains(&pd));
    }
    // per-step artifacts come from the omni runs: flat pattern every step
    for line in read(tmp.path(), "beampattern.csv").lines().skip(1) {
        assert!(line.split(',').skip(1).all(|v| v.parse::<f64>().unwrap().abs() < 1e-9));
    }
    assert!(read(tmp.path(), "config_resolved.toml").contains("baseline = \"omni\""));
}

#[test]
fn resolved_config_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let second = tmp.path().join("second");
    let config = tmp.path().join("scenario.toml");
    fs::write(
        &config,
        "runs = 2\nsteps = 10\n\n[agent]\nreward = \"pdf_literal\"\n\n[[targets]]\nangle_deg = 20.0\nsnr_db = -5.0\n",
    )
    .unwrap();
    run_ok(&["--scenario", config.to_str().unwrap(), "--out", first.to_str().unwrap()]);
    let echoed = read(&first, "config_resolved.toml");
    assert!(echoed.contains("seed = 0"));
    assert!(echoed.contains("bin = "));
    run_ok(&[
        "--scenario",
        first.join("config_resolved.toml").to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    for name in FILES {
        assert_eq!(read(&first, name), read(&second, name), "{name}");
    }
}

#[test]
fn failures_have_distinct_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let out = out.to_str().unwrap();

    assert_eq!(rlbeam(&["--bogus"]).status.code(), Some(2));

    let missing = tmp.path().join("missing.toml");
    assert_eq!(
        rlbeam(&["--scenario", missing.to_str().unwrap(), "--out", out])
            .status
            .code(),
        Some(3)
    );

    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "[detector]\np_fa = 0.0\n").unwrap();
    let res = rlbeam(&["--scenario", bad.to_str().unwrap(), "--out", out]);
    assert_eq!(res.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&res.stderr).contains("detector.p_fa"));

    let typo = tmp.path().join("typo.toml");
    fs::write(&typo, "sead = 1\n").unwrap();
    assert_eq!(
        rlbeam(&["--scenario", typo.to_str().unwrap(), "--out", out])
            .status
            .code(),
        Some(4)
    );

    assert_eq!(rlbeam(&["--runs", "0", "--out", out]).status.code(), Some(4));

    let blocker = tmp.path().join("file");
    fs::write(&blocker, "").unwrap();
    let nested = blocker.join("out");
    assert_eq!(
        rlbeam(&["--k", "2", "--runs", "1", "--out", nested.to_str().unwrap()])
            .status
            .code(),
        Some(5)
    );
    assert!(!Path::new(out).exists(), "no output on failure");
}
