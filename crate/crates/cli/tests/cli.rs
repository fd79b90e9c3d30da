use std::path::Path;
use std::process::{Command, Output};

fn tsqm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tsqm")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn report_without_timing(path: &Path) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    v.as_object_mut().unwrap().remove("duration_ms");
    v
}

#[test]
fn list_shows_every_criterion_in_order() {
    let o = tsqm(&["list"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let crits: Vec<&str> = text.lines().map(|l| l.split_whitespace().nth(1).unwrap()).collect();
    assert_eq!(crits, (1..=10).map(|i| format!("A{i}")).collect::<Vec<_>>());
    assert_eq!(text, String::from_utf8(tsqm(&["list"]).stdout).unwrap());
}

#[test]
fn config_run_writes_a_reproducible_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(&cfg, "experiment = \"time-reversal\"\nseed = 11\n\n[params]\nstates = 20\ntrials = 2000\ntv_tolerance = 0.05\n").unwrap();
    let mut reports = Vec::new();
    for (i, threads) in ["1", "2"].into_iter().enumerate() {
        let out = dir.path().join(format!("r{i}.json"));
        let o = tsqm(&["run", "--config", cfg.to_str().unwrap(), "--threads", threads, "--out", out.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
        reports.push(report_without_timing(&out));
    }
    assert_eq!(reports[0], reports[1]);
    assert_eq!(reports[0]["criterion"], "A1");
    assert_eq!(reports[0]["seed"], 11);
}

#[test]
fn flags_override_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = tsqm(&["run", "naive-preparation", "--seed", "5", "--trials", "300", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let r = report_without_timing(&out);
    assert_eq!(r["params"]["trials"], 300);
    assert_eq!(r["statistics"][0]["samples"], 300);
}

#[test]
fn transcript_sample_is_exported() {
    let dir = tempfile::tempdir().unwrap();
    let tr = dir.path().join("t.jsonl");
    let o = tsqm(&["run", "instantaneity", "--seed", "2", "--trials", "20", "--transcript", tr.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&tr).unwrap();
    assert!(text.lines().count() > 5);
    for line in text.lines() {
        serde_json::from_str::<serde_json::Value>(line).unwrap();
    }
}

#[test]
fn criterion_failure_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("strict.toml");
    std::fs::write(&cfg, "experiment = \"forward-reversal\"\nseed = 3\n[params]\ntrials = 50\nsigmas = 1e-9\n").unwrap();
    let o = tsqm(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}

#[test]
fn usage_and_config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let typo = dir.path().join("typo.toml");
    std::fs::write(&typo, "experiment = \"time-reversal\"\nseed = 1\n[params]\ntrails = 5\n").unwrap();
    let no_seed = dir.path().join("noseed.toml");
    std::fs::write(&no_seed, "experiment = \"time-reversal\"\n").unwrap();
    for args in [
        vec!["run", "--config", typo.to_str().unwrap()],
        vec!["run", "--config", no_seed.to_str().unwrap()],
        vec!["run", "no-such-experiment", "--seed", "1"],
        vec!["run", "time-reversal"],
        vec!["run", "time-reversal", "--seed", "1", "--trials", "0"],
        vec!["verify-all"],
        vec!["frobnicate"],
    ] {
        let o = tsqm(&args);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}
