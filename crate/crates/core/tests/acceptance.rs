//! Acceptance criteria A1–A10, one line each.
//!
//! Tolerances are pinned here rather than taken from experiment defaults.
//! A6 runs the 10-vector fast subsample; `TSQM_FULL=1` runs all 50.

use std::process::ExitCode;
use std::time::Instant;

use tsqm::experiments::{list_experiments, run, ExperimentConfig, Params};

const SEED: u64 = 20_240_917;

fn params(id: &str) -> Params {
    let full = std::env::var("TSQM_FULL").is_ok_and(|v| v == "1");
    let mut p = Params { tv_tolerance: Some(0.02), sigmas: Some(3.0), ..Params::default() };
    match id {
        "time-reversal" => {
            p.states = Some(1000);
            p.trials = Some(100_000);
        }
        "forward-reversal" | "demolition-statistics" | "round-convergence" => p.trials = Some(100_000),
        "demolition-reliability" => p.trials = Some(10_000),
        "abl-agreement" => {
            p.states = Some(if full { 50 } else { 10 });
            p.trials = Some(100_000);
        }
        "instantaneity" => p.trials = Some(1000),
        "naive-preparation" => p.trials = Some(10_000),
        _ => {}
    }
    if matches!(id, "demolition-reliability" | "demolition-statistics" | "round-convergence" | "instantaneity") {
        p.max_rounds = Some(8);
    }
    p
}

fn main() -> ExitCode {
    let mut failed = 0;
    for info in list_experiments() {
        let config = ExperimentConfig { params: params(info.id), ..ExperimentConfig::new(info.id, SEED) };
        let start = Instant::now();
        match run(&config) {
            Ok(report) => {
                let ok = report.passed();
                let n = report.checks.len();
                let bad: Vec<_> = report.checks.iter().filter(|c| !c.passed).collect();
                println!(
                    "{} {} {:<24} {}/{} checks  {:>6.1}s  {}",
                    info.criterion,
                    if ok { "PASS" } else { "FAIL" },
                    info.id,
                    n - bad.len(),
                    n,
                    start.elapsed().as_secs_f64(),
                    report.checks.first().map(|c| c.describe()).unwrap_or_default(),
                );
                for c in bad {
                    println!("    {}", c.describe());
                }
                if !ok {
                    failed += 1;
                }
            }
            Err(e) => {
                println!("{} FAIL {:<24} error: {e}", info.criterion, info.id);
                failed += 1;
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
