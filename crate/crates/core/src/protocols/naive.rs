//! The "prepare instead of measure" strategy for a backward-evolving state.
//!
//! Preparing an eigenstate at time `t` and post-selecting onto the backward
//! state only reports which eigenstate was prepared; it says nothing about the
//! state the system was in.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::qcore::StateVector;
use crate::rng::RandomSource;
use crate::stats::total_variation;
use crate::tsv::{Scenario, StepKind};

use super::observable::NonlocalObservable;

pub const NAIVE_TIME: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrepareStrategy {
    /// Always prepare eigenstate `k`.
    Fixed(usize),
    /// Prepare a uniformly random eigenstate each run.
    UniformRandom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveReport {
    pub empirical: Vec<f64>,
    /// Born distribution of the backward state over the eigenbasis.
    pub oracle: Vec<f64>,
    /// Post-selected distribution the strategy produces, computed exactly.
    pub analytic: Vec<f64>,
    pub total_variation: f64,
    pub accepted_runs: u64,
    pub attempts: u64,
}

/// Timeline for the strategy: the system starts in `|0…0⟩`, is overwritten
/// with a prepared eigenstate at [`NAIVE_TIME`] and post-selected onto
/// `backward` afterwards.
pub fn naive_scenario(observable: &NonlocalObservable, strategy: PrepareStrategy, backward: &StateVector) -> Result<Scenario> {
    let n = observable.num_qubits();
    if backward.num_qubits() != n {
        return Err(domain("backward state does not match the observable"));
    }
    let d = observable.eigenstates().len();
    let weights = match strategy {
        PrepareStrategy::Fixed(k) if k < d => (0..d).map(|i| if i == k { 1.0 } else { 0.0 }).collect(),
        PrepareStrategy::Fixed(k) => return Err(domain(format!("eigen-index {k} out of range"))),
        PrepareStrategy::UniformRandom => vec![1.0; d],
    };
    let mut s = Scenario::new(StateVector::basis_state(n, 0)?, observable.sites().to_vec())?;
    let targets: Vec<usize> = (0..n).collect();
    s.push_step(
        observable.sites()[0],
        NAIVE_TIME,
        StepKind::Prepare { targets: targets.clone(), states: observable.eigenstates().to_vec(), weights: Some(weights) },
    )?;
    s.postselect_state(backward.clone(), targets)?;
    Ok(s)
}

/// Samples `runs` accepted runs of the strategy and compares the reported
/// labels with the Born/ABL oracle for the backward state.
pub fn naive_prepare_strategy(
    observable: &NonlocalObservable,
    strategy: PrepareStrategy,
    backward: &StateVector,
    runs: u64,
    source: &RandomSource,
) -> Result<NaiveReport> {
    let s = naive_scenario(observable, strategy, backward)?;
    let step = s.steps()[0].id;
    let (tally, attempts) = s.conditional_distribution(step, source, runs, u64::MAX)?;
    let empirical = tally.frequencies();
    let oracle = observable.born_distribution(backward)?;
    let analytic = s.exact_distribution(step)?;
    let total_variation = total_variation(&empirical, &oracle);
    Ok(NaiveReport { empirical, oracle, analytic, total_variation, accepted_runs: tally.total(), attempts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::matrix::c;

    fn plus_superposition() -> StateVector {
        let obs = NonlocalObservable::crossed_forward();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let e = obs.eigenstates();
        let amps = e[0].amplitudes().iter().zip(e[1].amplitudes()).map(|(a, b)| (a + b) * c(s, 0.0)).collect();
        StateVector::from_amplitudes(2, amps).unwrap()
    }

    #[test]
    fn fixed_preparation_reports_its_label() {
        let obs = NonlocalObservable::crossed_forward();
        let r = naive_prepare_strategy(&obs, PrepareStrategy::Fixed(0), &plus_superposition(), 2000, &RandomSource::new(51)).unwrap();
        assert_eq!(r.empirical[0], 1.0);
        assert!((r.oracle[0] - 0.5).abs() < 1e-12);
        assert!((r.total_variation - 0.5).abs() < 1e-12);
    }

    #[test]
    fn degenerate_case_agrees() {
        let obs = NonlocalObservable::crossed_forward();
        let e0 = obs.eigenstates()[0].clone();
        let r = naive_prepare_strategy(&obs, PrepareStrategy::Fixed(0), &e0, 500, &RandomSource::new(52)).unwrap();
        assert!(r.total_variation < 1e-12);
    }

    #[test]
    fn uniform_preparation_matches_the_oracle_exactly() {
        let obs = NonlocalObservable::bell_operator();
        let phi = StateVector::random(2, &mut RandomSource::new(53).substream(0));
        let s = naive_scenario(&obs, PrepareStrategy::UniformRandom, &phi).unwrap();
        let exact = s.exact_distribution(s.steps()[0].id).unwrap();
        assert!(total_variation(&exact, &obs.born_distribution(&phi).unwrap()) < 1e-9);
    }

    #[test]
    fn out_of_range_label_is_rejected() {
        let obs = NonlocalObservable::crossed_forward();
        assert!(naive_prepare_strategy(&obs, PrepareStrategy::Fixed(4), &plus_superposition(), 1, &RandomSource::new(1)).is_err());
    }
}
