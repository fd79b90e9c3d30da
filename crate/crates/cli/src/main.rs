//! `tsqm`: runs the built-in protocol experiments.
//!
//! Exit status: 0 when every criterion passes, 1 when one fails, 2 for
//! usage, configuration and runtime errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tsqm::experiments::{self, ExperimentConfig, Report};

#[derive(Parser)]
#[command(name = "tsqm", version, about = "Time-symmetric quantum measurement experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a config file or by id.
    Run {
        /// Experiment id; overrides the config's `experiment`.
        experiment: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write a JSON-lines transcript sample here, when the experiment has one.
        #[arg(long)]
        transcript: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// List the built-in experiments.
    List,
    /// Run every built-in experiment.
    VerifyAll {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Upper bound on worker threads.
    #[arg(long)]
    threads: Option<usize>,
    /// Where to write the JSON report.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Criteria,
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn set_threads(threads: Option<usize>) -> Result<(), Failure> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn run_one(experiment: Option<String>, config: Option<PathBuf>, transcript: Option<PathBuf>, common: Common) -> Result<(), Failure> {
    let mut cfg = match (&config, &experiment, common.seed) {
        (Some(p), _, _) => load_config(p)?,
        (None, Some(id), Some(seed)) => ExperimentConfig::new(id, seed),
        (None, Some(_), None) => return Err(Failure::Usage("a seed is required: pass --seed or use --config".into())),
        (None, None, _) => return Err(Failure::Usage("name an experiment or pass --config".into())),
    };
    if let Some(id) = experiment {
        cfg.experiment = id;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(t) = common.trials {
        cfg.params.trials = Some(t);
    }
    set_threads(common.threads)?;
    let report = experiments::run(&cfg)?;
    print!("{}", report.table());
    let out = common.out.or(cfg.output.report.map(PathBuf::from));
    if let Some(path) = out {
        write(&path, &report.to_json()?)?;
    }
    if let Some(path) = transcript.or(cfg.output.transcript.map(PathBuf::from)) {
        match &report.transcript {
            Some(t) => write(&path, &t.export_jsonl()?)?,
            None => eprintln!("{} produces no transcript sample", report.experiment),
        }
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Criteria)
    }
}

fn verify_all(common: Common) -> Result<(), Failure> {
    let seed = common.seed.ok_or_else(|| Failure::Usage("verify-all needs --seed".into()))?;
    set_threads(common.threads)?;
    let params = experiments::Params { trials: common.trials, ..Default::default() };
    let reports: Vec<Report> = experiments::verify_all(seed, &params)?;
    for r in &reports {
        print!("{}", r.table());
    }
    if let Some(path) = common.out {
        write(&path, &serde_json::to_string_pretty(&reports)?)?;
    }
    let failed: Vec<&str> = reports.iter().filter(|r| !r.passed()).map(|r| r.criterion.as_str()).collect();
    if failed.is_empty() {
        println!("all {} criteria passed", reports.len());
        Ok(())
    } else {
        println!("failed: {}", failed.join(", "));
        Err(Failure::Criteria)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { experiment, config, transcript, common } => run_one(experiment, config, transcript, common),
        Command::List => {
            for e in experiments::list_experiments() {
                println!("{:<24} {:<4} {}", e.id, e.criterion, e.description);
            }
            Ok(())
        }
        Command::VerifyAll { common } => verify_all(common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Criteria) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
