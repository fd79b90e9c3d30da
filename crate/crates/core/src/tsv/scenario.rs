use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, validation, Error, Result};
use crate::ledger::{ChannelId, SiteId, Transcript};
use crate::qcore::matrix::{self, serde_matrix, CMatrix};
use crate::qcore::state::{
    apply_matrix_raw, check_capacity, check_targets, contract_raw, embed_raw, norm_sqr, reduced_density_raw,
    sample_index,
};
use crate::qcore::{BellOutcome, PauliByproduct, QubitId, StateVector, NORM_TOL, PROB_FLOOR};
use crate::rng::RandomSource;
use crate::stats::Tally;

use super::two_state::{GeneralizedTwoStateVector, TwoStateVector};

/// Default rejection budget for post-selected sampling.
pub const DEFAULT_MAX_ATTEMPTS: u64 = 1_000_000;

/// Upper bound on the branch count of exact evaluation.
const MAX_BRANCHES: usize = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StepId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChannelKind {
    PhiPlus,
    Singlet,
}

impl ChannelKind {
    pub fn state(self) -> StateVector {
        match self {
            Self::PhiPlus => StateVector::bell(BellOutcome::PhiPlus),
            Self::Singlet => StateVector::singlet(),
        }
    }

    /// Byproduct the channel itself contributes to a teleported state:
    /// `singlet = (I ⊗ XZ) PhiPlus`.
    pub fn frame(self) -> PauliByproduct {
        match self {
            Self::PhiPlus => PauliByproduct::I,
            Self::Singlet => PauliByproduct::XZ,
        }
    }
}

/// A pre-shared EPR pair inside a scenario register.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioChannel {
    pub id: ChannelId,
    pub qubits: (QubitId, QubitId),
    pub sites: (SiteId, SiteId),
    pub kind: ChannelKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum StepKind {
    Unitary {
        #[serde(with = "serde_matrix")]
        matrix: CMatrix,
        targets: Vec<QubitId>,
    },
    Measure {
        #[serde(with = "serde_matrix::vec")]
        projectors: Vec<CMatrix>,
        targets: Vec<QubitId>,
    },
    BellMeasure {
        pair: (QubitId, QubitId),
    },
    /// Bell measurement followed by the local Pauli on `pair.1` that turns
    /// every outcome into the singlet. Records the Bell outcome.
    PrepareSinglet {
        pair: (QubitId, QubitId),
    },
    /// Discards `targets` and replaces them with `states[k]`, `k` drawn with
    /// the given weights (uniform when absent). Records `k`.
    Prepare {
        targets: Vec<QubitId>,
        states: Vec<StateVector>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weights: Option<Vec<f64>>,
    },
    /// Bookkeeping marker: the channel is consumed at this point.
    Channel {
        channel: ChannelId,
    },
}

impl StepKind {
    pub fn targets(&self) -> Vec<QubitId> {
        match self {
            Self::Unitary { targets, .. } | Self::Measure { targets, .. } | Self::Prepare { targets, .. } => {
                targets.clone()
            }
            Self::BellMeasure { pair } | Self::PrepareSinglet { pair } => vec![pair.0, pair.1],
            Self::Channel { .. } => Vec::new(),
        }
    }

    pub fn records_outcome(&self) -> bool {
        !matches!(self, Self::Unitary { .. } | Self::Channel { .. })
    }

    fn label(&self) -> &'static str {
        match self {
            Self::Unitary { .. } => "unitary",
            Self::Measure { .. } => "measure",
            Self::BellMeasure { .. } => "bell",
            Self::PrepareSinglet { .. } => "prepare-singlet",
            Self::Prepare { .. } => "prepare",
            Self::Channel { .. } => "channel",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub id: StepId,
    pub site: SiteId,
    pub time: f64,
    pub kind: StepKind,
    /// Part of the apparatus that defines the pre/post-selection (e.g. the
    /// couplings of a nonlocal-in-time measurement) rather than a disturbance.
    #[serde(default)]
    pub apparatus: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PostSelection {
    Projector {
        #[serde(with = "serde_matrix")]
        matrix: CMatrix,
        targets: Vec<QubitId>,
    },
    /// Rank-one projector onto `state` on `targets`.
    State { state: StateVector, targets: Vec<QubitId> },
}

impl PostSelection {
    pub fn targets(&self) -> &[QubitId] {
        match self {
            Self::Projector { targets, .. } | Self::State { targets, .. } => targets,
        }
    }

    /// Applies the (unnormalized) projector in place and returns the squared norm.
    fn project(&self, amps: &mut Vec<Complex64>, n: usize) -> f64 {
        match self {
            Self::Projector { matrix, targets } => apply_matrix_raw(amps, n, matrix, targets),
            Self::State { state, targets } => {
                let rest = contract_raw(amps, n, targets, state.amplitudes());
                *amps = embed_raw(&rest, n, targets, state.amplitudes());
            }
        }
        norm_sqr(amps)
    }
}

/// A timed pre-/post-selection experiment.
///
/// Free evolution is the identity, so only the order of steps matters; time
/// coordinates are nondecreasing along the timeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    preselection: StateVector,
    sites: Vec<SiteId>,
    steps: Vec<Step>,
    postselections: Vec<PostSelection>,
    #[serde(default)]
    channels: Vec<ScenarioChannel>,
    #[serde(default)]
    next_step: u32,
}

/// Record of one accepted run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub outcomes: Vec<(StepId, usize)>,
    pub attempts: u64,
    pub state: StateVector,
}

impl RunRecord {
    pub fn outcome(&self, step: StepId) -> Option<usize> {
        self.outcomes.iter().find(|(s, _)| *s == step).map(|&(_, k)| k)
    }
}

/// One unnormalized branch of the exact evaluation.
#[derive(Debug, Clone)]
pub struct Branch {
    pub amplitudes: Vec<Complex64>,
    pub outcomes: Vec<(StepId, usize)>,
}

impl Branch {
    pub fn weight(&self) -> f64 {
        norm_sqr(&self.amplitudes)
    }

    pub fn outcome(&self, step: StepId) -> Option<usize> {
        self.outcomes.iter().find(|(s, _)| *s == step).map(|&(_, k)| k)
    }
}

impl Scenario {
    pub fn new(preselection: StateVector, sites: Vec<SiteId>) -> Result<Self> {
        if sites.len() != preselection.num_qubits() {
            return Err(domain("site partition must tag every qubit"));
        }
        Ok(Self { preselection, sites, steps: Vec::new(), postselections: Vec::new(), channels: Vec::new(), next_step: 0 })
    }

    /// Pre-selects the ket and post-selects onto the bra.
    pub fn from_two_state_vector(tsv: &TwoStateVector) -> Result<Self> {
        let mut s = Self::new(tsv.ket().clone(), tsv.sites().to_vec())?;
        let n = tsv.num_qubits();
        s.postselect_state(tsv.bra().clone(), (0..n).collect())?;
        Ok(s)
    }

    pub fn num_qubits(&self) -> usize {
        self.preselection.num_qubits()
    }

    pub fn preselection(&self) -> &StateVector {
        &self.preselection
    }

    pub fn sites(&self) -> &[SiteId] {
        &self.sites
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn step(&self, id: StepId) -> Option<&Step> {
        self.steps.iter().find(|s| s.id == id)
    }

    pub fn postselections(&self) -> &[PostSelection] {
        &self.postselections
    }

    pub fn channels(&self) -> &[ScenarioChannel] {
        &self.channels
    }

    /// Time of the last step, or 0 for an empty timeline.
    pub fn final_time(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.time)
    }

    /// Appends a fresh qubit in `state` at `site`.
    pub fn add_qubit(&mut self, site: SiteId, state: &StateVector) -> Result<QubitId> {
        if state.num_qubits() != 1 {
            return Err(domain("add_qubit takes a single-qubit state"));
        }
        let q = self.num_qubits();
        self.preselection = self.preselection.tensor(state)?;
        self.sites.push(site);
        Ok(q)
    }

    /// Appends a pre-shared pair with its first half at `a` and second at `b`.
    pub fn add_channel(&mut self, kind: ChannelKind, a: SiteId, b: SiteId) -> Result<ScenarioChannel> {
        let q = self.num_qubits();
        self.preselection = self.preselection.tensor(&kind.state())?;
        self.sites.extend([a, b]);
        let id = ChannelId(self.channels.len() as u64);
        let ch = ScenarioChannel { id, qubits: (q, q + 1), sites: (a, b), kind };
        self.channels.push(ch.clone());
        Ok(ch)
    }

    pub fn add_singlet_channel(&mut self, a: SiteId, b: SiteId) -> Result<ScenarioChannel> {
        self.add_channel(ChannelKind::Singlet, a, b)
    }

    /// Whether the channel already has a consumption marker on the timeline.
    pub fn is_consumed(&self, channel: ChannelId) -> bool {
        self.steps.iter().any(|s| matches!(s.kind, StepKind::Channel { channel: c } if c == channel))
    }

    fn validate_kind(&self, kind: &StepKind) -> Result<()> {
        let n = self.num_qubits();
        match kind {
            StepKind::Unitary { matrix, targets } => {
                check_targets(n, targets)?;
                if matrix.nrows() != 1 << targets.len() {
                    return Err(domain("unitary dimension does not match targets"));
                }
                matrix::check_unitary(matrix, NORM_TOL)
            }
            StepKind::Measure { projectors, targets } => {
                check_targets(n, targets)?;
                matrix::check_projectors(projectors, 1 << targets.len(), NORM_TOL)
            }
            StepKind::BellMeasure { pair } | StepKind::PrepareSinglet { pair } => {
                if pair.0 == pair.1 {
                    return Err(domain("pair names one qubit twice"));
                }
                check_targets(n, &[pair.0, pair.1])
            }
            StepKind::Prepare { targets, states, weights } => {
                check_targets(n, targets)?;
                if states.is_empty() || states.iter().any(|s| s.num_qubits() != targets.len()) {
                    return Err(domain("prepared states must match the targets"));
                }
                if let Some(w) = weights {
                    if w.len() != states.len() || w.iter().any(|x| !(*x >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
                        return Err(validation("invalid preparation weights"));
                    }
                }
                Ok(())
            }
            StepKind::Channel { channel } => {
                if !self.channels.iter().any(|c| c.id == *channel) {
                    return Err(Error::Resource(format!("channel {} is not part of this scenario", channel.0)));
                }
                if self.is_consumed(*channel) {
                    return Err(Error::Resource(format!("channel {} already consumed", channel.0)));
                }
                Ok(())
            }
        }
    }

    /// Appends a step; `time` must not precede the last step.
    pub fn push_step(&mut self, site: SiteId, time: f64, kind: StepKind) -> Result<StepId> {
        if time < self.final_time() || !time.is_finite() {
            return Err(domain(format!("step at time {time} precedes the end of the timeline")));
        }
        self.insert_step(site, time, kind)
    }

    /// Inserts a step after every existing step with time `<= time`.
    pub fn insert_step(&mut self, site: SiteId, time: f64, kind: StepKind) -> Result<StepId> {
        self.insert_step_with(site, time, kind, false)
    }

    pub fn insert_apparatus_step(&mut self, site: SiteId, time: f64, kind: StepKind) -> Result<StepId> {
        self.insert_step_with(site, time, kind, true)
    }

    fn insert_step_with(&mut self, site: SiteId, time: f64, kind: StepKind, apparatus: bool) -> Result<StepId> {
        if !time.is_finite() {
            return Err(domain("step time must be finite"));
        }
        self.validate_kind(&kind)?;
        let id = StepId(self.next_step);
        self.next_step += 1;
        let pos = self.steps.iter().position(|s| s.time > time).unwrap_or(self.steps.len());
        self.steps.insert(pos, Step { id, site, time, kind, apparatus });
        Ok(id)
    }

    pub fn postselect_projector(&mut self, matrix: CMatrix, targets: Vec<QubitId>) -> Result<()> {
        check_targets(self.num_qubits(), &targets)?;
        let d = 1 << targets.len();
        if matrix.nrows() != d
            || matrix::max_abs_diff(&matrix, &matrix.adjoint()) > NORM_TOL
            || matrix::max_abs_diff(&(&matrix * &matrix), &matrix) > NORM_TOL
        {
            return Err(validation("post-selection is not a projector on its targets"));
        }
        self.postselections.push(PostSelection::Projector { matrix, targets });
        Ok(())
    }

    pub fn postselect_state(&mut self, state: StateVector, targets: Vec<QubitId>) -> Result<()> {
        check_targets(self.num_qubits(), &targets)?;
        if state.num_qubits() != targets.len() {
            return Err(domain("post-selected state does not match targets"));
        }
        self.postselections.push(PostSelection::State { state, targets });
        Ok(())
    }

    /// Re-checks every invariant; used after deserialization.
    pub fn validate(&self) -> Result<()> {
        check_capacity(self.num_qubits())?;
        if self.sites.len() != self.num_qubits() {
            return Err(domain("site partition must tag every qubit"));
        }
        if self.steps.windows(2).any(|w| w[1].time < w[0].time) {
            return Err(domain("step times must be nondecreasing"));
        }
        let mut ids: Vec<StepId> = self.steps.iter().map(|s| s.id).collect();
        ids.sort();
        ids.dedup();
        if ids.len() != self.steps.len() {
            return Err(domain("duplicate step ids"));
        }
        let mut replay = Scenario { steps: Vec::new(), postselections: Vec::new(), ..self.clone() };
        for s in &self.steps {
            replay.validate_kind(&s.kind)?;
            replay.steps.push(s.clone());
        }
        for p in &self.postselections {
            match p {
                PostSelection::Projector { matrix, targets } => replay.postselect_projector(matrix.clone(), targets.clone())?,
                PostSelection::State { state, targets } => replay.postselect_state(state.clone(), targets.clone())?,
            }
        }
        Ok(())
    }

    /// Steps whose targets include `q`.
    pub fn steps_touching(&self, q: QubitId) -> impl Iterator<Item = &Step> {
        self.steps.iter().filter(move |s| s.kind.targets().contains(&q))
    }

    /// Makes `particle` one half of a pre-shared pair whose other half is a
    /// new qubit at `site`. The particle must be untouched by every step and
    /// unentangled in the pre-selection; its pre-selected state is replaced.
    pub fn attach_partner(&mut self, particle: QubitId, site: SiteId, kind: ChannelKind) -> Result<ScenarioChannel> {
        check_targets(self.num_qubits(), &[particle])?;
        if self.steps_touching(particle).next().is_some() {
            return Err(Error::Protocol(format!("qubit {particle} is already used by the timeline")));
        }
        let sub = self
            .preselection
            .subsystem(&[particle])
            .map_err(|_| validation(format!("qubit {particle} is entangled in the pre-selection")))?;
        let n = self.num_qubits();
        check_capacity(n + 1)?;
        let rest = contract_raw(self.preselection.amplitudes(), n, &[particle], sub.amplitudes());
        let partner = n;
        // the pair's first qubit is the new partner, its second the particle
        self.preselection =
            StateVector::from_raw(n + 1, embed_raw(&rest, n + 1, &[partner, particle], kind.state().amplitudes()));
        self.sites.push(site);
        let id = ChannelId(self.channels.len() as u64);
        let ch = ScenarioChannel { id, qubits: (partner, particle), sites: (site, self.sites[particle]), kind };
        self.channels.push(ch.clone());
        Ok(ch)
    }

    fn run_step<R: Rng + ?Sized>(&self, state: &mut StateVector, step: &Step, rng: &mut R) -> Result<Option<usize>> {
        match &step.kind {
            StepKind::Unitary { matrix, targets } => {
                state.apply_unitary_unchecked(matrix, targets);
                Ok(None)
            }
            StepKind::Measure { projectors, targets } => {
                let (k, post, _) = state.measure_projective_unchecked(projectors, targets, rng)?;
                *state = post;
                Ok(Some(k))
            }
            StepKind::BellMeasure { pair } => {
                let (o, post) = state.bell_measure(*pair, rng)?;
                *state = post;
                Ok(Some(o.index()))
            }
            StepKind::PrepareSinglet { pair } => {
                let (o, post) = state.bell_measure(*pair, rng)?;
                *state = post;
                state.apply_pauli_unchecked(o.correction().then(PauliByproduct::XZ), pair.1);
                Ok(Some(o.index()))
            }
            StepKind::Prepare { targets, states, weights } => {
                let n = state.num_qubits();
                let d = 1usize << targets.len();
                let rests: Vec<Vec<Complex64>> = (0..d)
                    .map(|m| {
                        let mut basis = vec![Complex64::new(0.0, 0.0); d];
                        basis[m] = Complex64::new(1.0, 0.0);
                        contract_raw(state.amplitudes(), n, targets, &basis)
                    })
                    .collect();
                let probs: Vec<f64> = rests.iter().map(|r| norm_sqr(r)).collect();
                let m = sample_index(&probs, rng)?;
                let k = match weights {
                    Some(w) => sample_index(w, rng)?,
                    None => rng.random_range(0..states.len()),
                };
                let s = 1.0 / probs[m].sqrt();
                let rest: Vec<Complex64> = rests[m].iter().map(|a| a * s).collect();
                *state = StateVector::from_raw(n, embed_raw(&rest, n, targets, states[k].amplitudes()));
                Ok(Some(k))
            }
            StepKind::Channel { .. } => Ok(None),
        }
    }

    /// Simulates the timeline once. Returns `None` when a post-selection fails.
    pub fn run_once<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Option<(Vec<(StepId, usize)>, StateVector)>> {
        let mut state = self.preselection.clone();
        let mut outcomes = Vec::new();
        for step in &self.steps {
            if let Some(k) = self.run_step(&mut state, step, rng)? {
                outcomes.push((step.id, k));
            }
        }
        Ok(self.postselect_run(state, rng).map(|s| (outcomes, s)))
    }

    /// Runs the steps with time `<= at`, hands the register to `interlude`,
    /// then runs the remaining steps and the post-selections. The interlude
    /// must return a register of the same size.
    pub fn run_with_interlude<R, T, F>(&self, rng: &mut R, at: f64, interlude: F) -> Result<Option<(Vec<(StepId, usize)>, StateVector, T)>>
    where
        R: Rng + ?Sized,
        F: FnOnce(StateVector, &mut R) -> Result<(StateVector, T)>,
    {
        let mut state = self.preselection.clone();
        let mut outcomes = Vec::new();
        let split = self.steps.iter().position(|s| s.time > at).unwrap_or(self.steps.len());
        for step in &self.steps[..split] {
            if let Some(k) = self.run_step(&mut state, step, rng)? {
                outcomes.push((step.id, k));
            }
        }
        let (next, value) = interlude(state, rng)?;
        if next.num_qubits() != self.num_qubits() {
            return Err(Error::State("interlude changed the register size".into()));
        }
        state = next;
        for step in &self.steps[split..] {
            if let Some(k) = self.run_step(&mut state, step, rng)? {
                outcomes.push((step.id, k));
            }
        }
        match self.postselect_run(state, rng) {
            Some(state) => Ok(Some((outcomes, state, value))),
            None => Ok(None),
        }
    }

    fn postselect_run<R: Rng + ?Sized>(&self, mut state: StateVector, rng: &mut R) -> Option<StateVector> {
        let n = state.num_qubits();
        for p in &self.postselections {
            let mut amps = state.amplitudes().to_vec();
            let prob = p.project(&mut amps, n);
            if prob < PROB_FLOOR || rng.random::<f64>() >= prob {
                return None;
            }
            let s = 1.0 / prob.sqrt();
            amps.iter_mut().for_each(|a| *a *= s);
            state = StateVector::from_raw(n, amps);
        }
        Some(state)
    }

    /// Rejection-samples one accepted run within `max_attempts` attempts.
    pub fn sample_postselected<R: Rng + ?Sized>(&self, rng: &mut R, max_attempts: u64) -> Result<RunRecord> {
        if max_attempts == 0 {
            return Err(domain("max_attempts must be at least 1"));
        }
        for attempt in 1..=max_attempts {
            if let Some((outcomes, state)) = self.run_once(rng)? {
                return Ok(RunRecord { outcomes, attempts: attempt, state });
            }
        }
        Err(Error::Exhausted { attempts: max_attempts })
    }

    /// Outcome frequencies of `step` over exactly `accepted_runs` accepted runs.
    ///
    /// Accepted run `i` draws from substream `i`, so the tally does not depend
    /// on thread scheduling. Also returns the total number of attempts.
    pub fn conditional_distribution(
        &self,
        step: StepId,
        source: &RandomSource,
        accepted_runs: u64,
        max_attempts: u64,
    ) -> Result<(Tally, u64)> {
        let categories = match self.step(step).map(|s| &s.kind) {
            Some(StepKind::Measure { projectors, .. }) => projectors.len(),
            Some(StepKind::BellMeasure { .. } | StepKind::PrepareSinglet { .. }) => 4,
            Some(StepKind::Prepare { states, .. }) => states.len(),
            _ => return Err(domain("the named step is not a measurement on this timeline")),
        };
        (0..accepted_runs)
            .into_par_iter()
            .map(|i| {
                let mut rng = source.substream(i);
                let rec = self.sample_postselected(&mut rng, max_attempts)?;
                Ok((rec.outcome(step).expect("measurement steps always record"), rec.attempts))
            })
            .try_fold(
                || (Tally::new(categories), 0u64),
                |(mut t, a), r: Result<(usize, u64)>| {
                    let (k, n) = r?;
                    t.record(k);
                    Ok((t, a + n))
                },
            )
            .try_reduce(|| (Tally::new(categories), 0), |(t1, a1), (t2, a2)| Ok((t1.merge(&t2), a1 + a2)))
    }

    /// Enumerates every measurement branch, post-selection applied, without
    /// normalization. Branch weights sum to the acceptance probability.
    pub fn branches(&self) -> Result<Vec<Branch>> {
        let n = self.num_qubits();
        let mut branches =
            vec![Branch { amplitudes: self.preselection.amplitudes().to_vec(), outcomes: Vec::new() }];
        for step in &self.steps {
            let mut next = Vec::new();
            for b in branches {
                match &step.kind {
                    StepKind::Unitary { matrix, targets } => {
                        let mut amps = b.amplitudes;
                        apply_matrix_raw(&mut amps, n, matrix, targets);
                        next.push(Branch { amplitudes: amps, outcomes: b.outcomes });
                    }
                    StepKind::Channel { .. } => next.push(b),
                    StepKind::Measure { projectors, targets } => {
                        for (k, p) in projectors.iter().enumerate() {
                            let mut amps = b.amplitudes.clone();
                            apply_matrix_raw(&mut amps, n, p, targets);
                            push_branch(&mut next, amps, &b.outcomes, step.id, k);
                        }
                    }
                    StepKind::BellMeasure { pair } | StepKind::PrepareSinglet { pair } => {
                        let targets = [pair.0, pair.1];
                        for o in BellOutcome::ALL {
                            let rest = contract_raw(&b.amplitudes, n, &targets, &o.amplitudes());
                            let post = if matches!(step.kind, StepKind::PrepareSinglet { .. }) {
                                BellOutcome::PsiMinus
                            } else {
                                o
                            };
                            let amps = embed_raw(&rest, n, &targets, &post.amplitudes());
                            push_branch(&mut next, amps, &b.outcomes, step.id, o.index());
                        }
                    }
                    StepKind::Prepare { targets, states, weights } => {
                        let d = 1usize << targets.len();
                        let total: f64 = weights.as_ref().map_or(states.len() as f64, |w| w.iter().sum());
                        for m in 0..d {
                            let mut basis = vec![Complex64::new(0.0, 0.0); d];
                            basis[m] = Complex64::new(1.0, 0.0);
                            let rest = contract_raw(&b.amplitudes, n, targets, &basis);
                            for (k, s) in states.iter().enumerate() {
                                let w = weights.as_ref().map_or(1.0, |w| w[k]) / total;
                                let scale = w.sqrt();
                                let scaled: Vec<Complex64> = rest.iter().map(|a| a * scale).collect();
                                let amps = embed_raw(&scaled, n, targets, s.amplitudes());
                                push_branch(&mut next, amps, &b.outcomes, step.id, k);
                            }
                        }
                    }
                }
            }
            if next.len() > MAX_BRANCHES {
                return Err(Error::Capacity(format!("exact evaluation exceeds {MAX_BRANCHES} branches")));
            }
            branches = next;
        }
        for b in &mut branches {
            for p in &self.postselections {
                p.project(&mut b.amplitudes, n);
            }
        }
        branches.retain(|b| b.weight() > 0.0);
        Ok(branches)
    }

    /// Exact probability that every post-selection fires.
    pub fn acceptance_probability(&self) -> Result<f64> {
        Ok(self.branches()?.iter().map(Branch::weight).sum())
    }

    /// Exact conditional distribution of a recorded step given acceptance.
    pub fn exact_distribution(&self, step: StepId) -> Result<Vec<f64>> {
        let s = self.step(step).ok_or_else(|| domain("unknown step"))?;
        if !s.kind.records_outcome() {
            return Err(domain("the named step records no outcome"));
        }
        let branches = self.branches()?;
        let total: f64 = branches.iter().map(Branch::weight).sum();
        if total < PROB_FLOOR {
            return Err(domain("post-selection never succeeds"));
        }
        let mut dist: Vec<f64> = Vec::new();
        for b in &branches {
            let k = b.outcome(step).expect("recorded");
            if k >= dist.len() {
                dist.resize(k + 1, 0.0);
            }
            dist[k] += b.weight() / total;
        }
        Ok(dist)
    }

    /// Exact reduced density matrix of `targets` at the end of the timeline,
    /// conditioned on acceptance.
    pub fn conditional_density(&self, targets: &[QubitId]) -> Result<CMatrix> {
        check_targets(self.num_qubits(), targets)?;
        let branches = self.branches()?;
        let total: f64 = branches.iter().map(Branch::weight).sum();
        if total < PROB_FLOOR {
            return Err(domain("post-selection never succeeds"));
        }
        let d = 1 << targets.len();
        let mut rho = CMatrix::zeros(d, d);
        for b in &branches {
            rho += reduced_density_raw(&b.amplitudes, self.num_qubits(), targets);
        }
        Ok(rho / Complex64::new(total, 0.0))
    }

    /// Static transcript of the timeline: local operations and measurements
    /// at their sites and times, plus channel provisioning and consumption.
    /// Post-selection is the experimenter's later filter and is not recorded.
    pub fn to_transcript(&self, tag: &str, measurement_time: f64) -> Result<Transcript> {
        let mut t = Transcript::new(measurement_time);
        for c in &self.channels {
            t.provision_with_id(c.id, 1, tag)?;
        }
        for s in &self.steps {
            match &s.kind {
                StepKind::Channel { channel } => {
                    t.consume(s.site, s.time, tag, *channel, 1)?;
                }
                StepKind::Unitary { .. } | StepKind::Prepare { .. } => {
                    t.local_op(s.site, s.time, tag, s.kind.label(), Vec::new())?;
                }
                StepKind::PrepareSinglet { .. } => {
                    t.measurement(s.site, s.time, tag, "bell", 0)?;
                    t.local_op(s.site, s.time, tag, "singlet-correction", Vec::new())?;
                }
                StepKind::Measure { .. } | StepKind::BellMeasure { .. } => {
                    t.measurement(s.site, s.time, tag, s.kind.label(), 0)?;
                }
            }
        }
        Ok(t.finalized())
    }
}

/// Realizes a generalized two-state vector as a pre/post-selected scenario.
///
/// With `T = Σ_m σ_m u_m v_m†` the singular value decomposition of the
/// coefficient matrix, the system (qubits `0..n`) and a protected ancilla
/// register holding `m` are pre-selected in `Σ_m √σ_m |v_m*⟩|m⟩` and
/// post-selected onto `Σ_m √σ_m |u_m*⟩|m⟩`, so that any operation on the
/// system in between sees `Σ_m σ_m ⟨u_m*| · |v_m*⟩`. A rank-one input needs
/// no ancilla. Ancilla qubits sit at an extra site after the system sites.
pub fn scenario_for_gtsv(g: &GeneralizedTwoStateVector) -> Result<Scenario> {
    let t = g.coefficient_matrix()?;
    let n = g.num_qubits();
    let svd = t.svd(true, true);
    let u = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let top = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let kept: Vec<usize> = (0..svd.singular_values.len()).filter(|&m| svd.singular_values[m] >= NORM_TOL * top).collect();
    let ancillas = kept.len().next_power_of_two().trailing_zeros() as usize;
    check_capacity(n + ancillas)?;
    let d = 1usize << n;
    let total = 1usize << (n + ancillas);
    let mut ket = vec![Complex64::new(0.0, 0.0); total];
    let mut bra = vec![Complex64::new(0.0, 0.0); total];
    for (slot, &m) in kept.iter().enumerate() {
        let w = svd.singular_values[m].sqrt();
        for j in 0..d {
            ket[j | (slot << n)] = v_t[(m, j)] * w;
            bra[j | (slot << n)] = u[(j, m)].conj() * w;
        }
    }
    let mut sites = g.sites();
    sites.extend(std::iter::repeat_n(SiteId(g.num_sites() as u32), ancillas));
    let mut s = Scenario::new(StateVector::normalized(n + ancillas, ket)?, sites)?;
    s.postselect_state(StateVector::normalized(n + ancillas, bra)?, (0..n + ancillas).collect())?;
    Ok(s)
}

fn push_branch(next: &mut Vec<Branch>, amps: Vec<Complex64>, prior: &[(StepId, usize)], step: StepId, k: usize) {
    if norm_sqr(&amps) <= 0.0 {
        return;
    }
    let mut outcomes = prior.to_vec();
    outcomes.push((step, k));
    next.push(Branch { amplitudes: amps, outcomes });
}
