//! Built-in experiments, one per acceptance criterion, with declarative
//! configs and structured reports.

mod criteria;

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ledger::Transcript;

/// One catalog entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ExperimentInfo {
    pub id: &'static str,
    pub criterion: &'static str,
    pub description: &'static str,
}

const CATALOG: &[ExperimentInfo] = &[
    ExperimentInfo {
        id: "time-reversal",
        criterion: "A1",
        description: "singlet-based reversal of a backward state onto a fresh ancilla",
    },
    ExperimentInfo {
        id: "forward-reversal",
        criterion: "A2",
        description: "success rate of reversing a forward state by one Bell measurement",
    },
    ExperimentInfo {
        id: "demolition-reliability",
        criterion: "A3",
        description: "demolition measurement of eigenstates never misidentifies them",
    },
    ExperimentInfo {
        id: "demolition-statistics",
        criterion: "A4",
        description: "demolition outcomes on superpositions follow the Born rule",
    },
    ExperimentInfo {
        id: "round-convergence",
        criterion: "A5",
        description: "cumulative success probability of the demolition rounds",
    },
    ExperimentInfo {
        id: "abl-agreement",
        criterion: "A6",
        description: "post-selected sampler against the ABL formula on random two-state vectors",
    },
    ExperimentInfo {
        id: "crossed-measurement",
        criterion: "A7",
        description: "crossed nonlocal-in-time measurements reversed into forward eigenstates",
    },
    ExperimentInfo {
        id: "consolidation-resources",
        criterion: "A8",
        description: "channels and classical bits used to gather an N-part backward state",
    },
    ExperimentInfo {
        id: "instantaneity",
        criterion: "A9",
        description: "transcript checker on demolition runs and on an early-message control",
    },
    ExperimentInfo {
        id: "naive-preparation",
        criterion: "A10",
        description: "preparing an eigenstate instead of measuring gives the wrong statistics",
    },
];

/// Built-in experiments in a stable order.
pub fn list_experiments() -> &'static [ExperimentInfo] {
    CATALOG
}

pub fn find_experiment(id: &str) -> Option<&'static ExperimentInfo> {
    CATALOG.iter().find(|e| e.id == id)
}

/// Tunable parameters. Unset fields take the per-experiment defaults, which
/// are the sizes the acceptance criteria call for.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Main sample size (accepted or successful runs, depending on the experiment).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    /// Number of random states or vectors drawn.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rounds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_attempts: Option<u64>,
    /// Total-variation tolerance for distribution comparisons.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tv_tolerance: Option<f64>,
    /// Width, in standard deviations, of rate comparisons.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigmas: Option<f64>,
}

impl Params {
    fn validate(&self) -> Result<()> {
        if self.trials == Some(0) || self.states == Some(0) || self.max_rounds == Some(0) || self.max_attempts == Some(0) {
            return Err(Error::Validation("trial, state, round and attempt counts must be at least 1".into()));
        }
        for v in [self.tv_tolerance, self.sigmas].into_iter().flatten() {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Validation("tolerances must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
    /// JSON-lines export of a representative transcript, when the experiment produces one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcript: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub seed: u64,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub output: OutputPaths,
}

impl ExperimentConfig {
    pub fn new(experiment: &str, seed: u64) -> Self {
        Self { experiment: experiment.to_string(), seed, params: Params::default(), output: OutputPaths::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// `|observed − expected| ≤ tolerance`
    Within,
    /// `observed ≤ expected`
    AtMost,
    /// `observed ≥ expected`
    AtLeast,
    /// `observed > expected`
    Above,
}

/// One pass/fail line: the criterion, what was compared and both numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub criterion: String,
    pub name: String,
    pub observed: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub passed: bool,
}

impl Check {
    pub fn new(criterion: &str, name: impl Into<String>, observed: f64, comparison: Comparison, expected: f64, tolerance: f64) -> Self {
        let passed = match comparison {
            Comparison::Within => (observed - expected).abs() <= tolerance,
            Comparison::AtMost => observed <= expected,
            Comparison::AtLeast => observed >= expected,
            Comparison::Above => observed > expected,
        };
        Self { criterion: criterion.to_string(), name: name.into(), observed, expected, tolerance, comparison, passed: passed && observed.is_finite() }
    }

    pub fn describe(&self) -> String {
        let rel = match self.comparison {
            Comparison::Within => format!("= {} ± {}", fmt_num(self.expected), fmt_num(self.tolerance)),
            Comparison::AtMost => format!("<= {}", fmt_num(self.expected)),
            Comparison::AtLeast => format!(">= {}", fmt_num(self.expected)),
            Comparison::Above => format!("> {}", fmt_num(self.expected)),
        };
        format!("{} {}: observed {} {}", if self.passed { "PASS" } else { "FAIL" }, self.name, fmt_num(self.observed), rel)
    }
}

fn fmt_num(x: f64) -> String {
    if x == x.trunc() && x.abs() < 1e15 {
        format!("{x:.0}")
    } else if x != 0.0 && (x.abs() < 1e-3 || x.abs() >= 1e6) {
        format!("{x:.3e}")
    } else {
        format!("{x:.5}")
    }
}

/// Empirical frequencies next to their oracle, with 3σ binomial radii.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statistic {
    pub label: String,
    pub samples: u64,
    pub empirical: Vec<f64>,
    pub oracle: Vec<f64>,
    pub radius: Vec<f64>,
}

impl Statistic {
    pub fn new(label: impl Into<String>, samples: u64, empirical: Vec<f64>, oracle: Vec<f64>) -> Self {
        let radius = oracle.iter().map(|&p| 3.0 * crate::stats::binomial_sigma(p, samples)).collect();
        Self { label: label.into(), samples, empirical, oracle, radius }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub criterion: String,
    pub seed: u64,
    pub params: Params,
    pub statistics: Vec<Statistic>,
    pub checks: Vec<Check>,
    pub transcript_digests: Vec<String>,
    /// Wall-clock duration; the only field allowed to differ between reruns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_ms: Option<u64>,
    #[serde(skip)]
    pub transcript: Option<Transcript>,
}

impl Report {
    pub fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.passed)
    }

    /// The report without wall-clock fields, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        Self { duration_ms: None, ..self.clone() }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::State(e.to_string()))
    }

    /// Human-readable table.
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} [{}] seed={} {}", self.experiment, self.criterion, self.seed, if self.passed() { "PASS" } else { "FAIL" });
        for st in &self.statistics {
            let _ = writeln!(s, "  {} (n={})", st.label, st.samples);
            let _ = writeln!(s, "    {:>5} {:>10} {:>10} {:>10}", "k", "empirical", "oracle", "3σ");
            for (k, ((e, o), r)) in st.empirical.iter().zip(&st.oracle).zip(&st.radius).enumerate() {
                let _ = writeln!(s, "    {k:>5} {e:>10.5} {o:>10.5} {r:>10.5}");
            }
        }
        for c in &self.checks {
            let _ = writeln!(s, "  {}", c.describe());
        }
        for d in &self.transcript_digests {
            let _ = writeln!(s, "  transcript {d}");
        }
        s
    }
}

/// Runs the configured experiment.
pub fn run(config: &ExperimentConfig) -> Result<Report> {
    let info = find_experiment(&config.experiment)
        .ok_or_else(|| Error::Validation(format!("unknown experiment '{}'", config.experiment)))?;
    config.params.validate()?;
    let start = Instant::now();
    let mut report = criteria::run(info, config.seed, &config.params)?;
    report.duration_ms = Some(start.elapsed().as_millis() as u64);
    Ok(report)
}

/// Every catalog experiment with default parameters.
pub fn verify_all(seed: u64, params: &Params) -> Result<Vec<Report>> {
    CATALOG
        .iter()
        .map(|e| run(&ExperimentConfig { experiment: e.id.to_string(), seed, params: params.clone(), output: OutputPaths::default() }))
        .collect()
}
