//! Round-based demolition measurement of a bipartite nonlocal variable.
//!
//! Round 1: Bob half-teleports his qubits to Alice, who applies the
//! eigenbasis unitary `U` as if no byproduct occurred and half-teleports the
//! whole register back. If Bob's byproducts were trivial he measures in the z
//! basis; otherwise he half-teleports what he received to Alice on the channel
//! group labelled by his full outcome history. On every group Alice undoes the
//! operator that group's history implies, re-applies `U`, and half-teleports
//! again. Only the group actually used is simulated; the others are counted.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::ledger::{ChannelId, SiteId, Transcript};
use crate::qcore::matrix::{self, CMatrix};
use crate::qcore::state::embed_raw;
use crate::qcore::{pauli_string, BellOutcome, PauliByproduct, QubitId, StateVector};
use crate::rng::RandomSource;
use crate::tsv::Scenario;

use super::observable::NonlocalObservable;
use super::reversal::time_reverse_backward;

pub const DEMOLITION_TAG: &str = "demolition";
/// Instant at which the demolition measurement takes place.
pub const MEASUREMENT_TIME: f64 = 0.0;
/// Largest number of qubits per site the protocol accepts.
pub const MAX_SITE_QUBITS: usize = 2;

/// Budget of EPR pairs available to a protocol run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelPool {
    capacity: Option<u64>,
    used: u64,
}

impl ChannelPool {
    pub fn unlimited() -> Self {
        Self { capacity: None, used: 0 }
    }

    pub fn with_pairs(pairs: u64) -> Self {
        Self { capacity: Some(pairs), used: 0 }
    }

    pub fn used(&self) -> u64 {
        self.used
    }

    pub fn remaining(&self) -> Option<u64> {
        self.capacity.map(|c| c - self.used)
    }

    pub fn ensure(&self, pairs: u64) -> Result<()> {
        match self.remaining() {
            Some(r) if r < pairs => Err(Error::Resource(format!("channel pool has {r} pairs, {pairs} needed"))),
            _ => Ok(()),
        }
    }

    pub fn take(&mut self, pairs: u64) -> Result<()> {
        self.ensure(pairs)?;
        self.used += pairs;
        Ok(())
    }
}

/// Which observable qubits sit with Alice and which with Bob.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    pub alice: Vec<usize>,
    pub bob: Vec<usize>,
}

impl Layout {
    pub fn of(observable: &NonlocalObservable) -> Result<Self> {
        let alice = observable.qubits_at(SiteId::ALICE);
        let bob = observable.qubits_at(SiteId::BOB);
        if alice.len() + bob.len() != observable.num_qubits() {
            return Err(domain("the demolition protocol is bipartite: every qubit must sit with Alice or Bob"));
        }
        if bob.is_empty() {
            return Err(domain("Bob holds no qubits; a local measurement suffices"));
        }
        if alice.len() > MAX_SITE_QUBITS || bob.len() > MAX_SITE_QUBITS {
            return Err(Error::Capacity(format!("at most {MAX_SITE_QUBITS} qubits per site")));
        }
        Ok(Self { alice, bob })
    }

    pub fn num_qubits(&self) -> usize {
        self.alice.len() + self.bob.len()
    }

    /// Channel groups Alice must serve in round `round` (1-based).
    pub fn groups(&self, round: usize) -> Option<u64> {
        if round <= 1 {
            return Some(1);
        }
        let first = 4u64.pow(self.bob.len() as u32) - 1;
        let later = 4u64.pow(self.num_qubits() as u32) - 1;
        (0..round - 2).try_fold(first, |g, _| g.checked_mul(later))
    }

    /// EPR pairs consumed in round `round`: Bob's sends plus Alice's sends,
    /// counting every group Alice processes.
    pub fn pairs_in_round(&self, round: usize) -> Option<u64> {
        let n = self.num_qubits() as u64;
        if round <= 1 {
            return Some(self.bob.len() as u64 + n);
        }
        self.groups(round)?.checked_mul(2 * n)
    }

    /// Pairs needed to run `rounds` rounds.
    pub fn pairs_required(&self, rounds: usize) -> Option<u64> {
        (1..=rounds).try_fold(0u64, |acc, r| acc.checked_add(self.pairs_in_round(r)?))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round_index: usize,
    pub bob_bell_outcomes: Vec<BellOutcome>,
    pub alice_bell_outcomes: Vec<BellOutcome>,
    pub channel_ids_used: Vec<ChannelId>,
    pub success: bool,
    /// z-basis results per observable qubit, present when Bob measured.
    pub z_results: Option<Vec<u8>>,
}

/// A finished run: the reconstructed eigen-index (absent after running out
/// of rounds), the round records and the event transcript.
#[derive(Debug, Clone, PartialEq)]
pub struct DemolitionRun {
    pub eigen_index: Option<usize>,
    pub records: Vec<RoundRecord>,
    pub transcript: Transcript,
}

impl DemolitionRun {
    pub fn rounds(&self) -> usize {
        self.records.len()
    }

    pub fn succeeded(&self) -> bool {
        self.eigen_index.is_some()
    }
}

/// Classical post-processing: flips each z result by the X part of Alice's
/// byproduct in the successful round and reads the label as an index.
pub fn reconstruct_outcome(records: &[RoundRecord], observable: &NonlocalObservable) -> Result<usize> {
    let last = records.last().filter(|r| r.success).ok_or_else(|| domain("no successful round to reconstruct from"))?;
    let z = last.z_results.as_ref().ok_or_else(|| domain("successful round without z results"))?;
    if z.len() != observable.num_qubits() || last.alice_bell_outcomes.len() != z.len() {
        return Err(domain("record does not match the observable"));
    }
    Ok(z.iter()
        .zip(&last.alice_bell_outcomes)
        .enumerate()
        .map(|(i, (&bit, o))| (((bit != 0) ^ o.correction().x_bit()) as usize) << i)
        .sum())
}

/// Register plus the current positions of the logical data qubits.
struct Live {
    reg: StateVector,
    pos: Vec<QubitId>,
}

impl Live {
    fn remove(&mut self, targets: [QubitId; 2], phi: &[Complex64]) {
        self.reg = self.reg.discard(&targets, phi);
        for p in &mut self.pos {
            *p -= targets.iter().filter(|&&t| t < *p).count();
        }
    }

    /// Half-teleports logical qubits `which` through fresh `PhiPlus` pairs.
    fn half_teleport<R: Rng + ?Sized>(&mut self, which: &[usize], rng: &mut R) -> Result<Vec<BellOutcome>> {
        let mut out = Vec::with_capacity(which.len());
        for &j in which {
            let n = self.reg.num_qubits();
            self.reg = self.reg.tensor(&StateVector::bell(BellOutcome::PhiPlus))?;
            let src = self.pos[j];
            let (o, post) = self.reg.bell_measure((src, n), rng)?;
            self.reg = post;
            self.pos[j] = n + 1;
            self.remove([src, n], &o.amplitudes());
            out.push(o);
        }
        Ok(out)
    }

    fn apply(&mut self, u: &CMatrix) {
        self.reg.apply_unitary_unchecked(u, &self.pos);
    }

    /// Measures every data qubit in the z basis and drops it from the register.
    fn measure_z<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<Vec<u8>> {
        let z = matrix::computational_projectors(1);
        let mut bits = Vec::with_capacity(self.pos.len());
        for j in 0..self.pos.len() {
            let q = self.pos[j];
            let (k, post, _) = self.reg.measure_projective_unchecked(&z, &[q], rng)?;
            let basis = StateVector::basis_state(1, k)?;
            self.reg = post.discard(&[q], basis.amplitudes());
            for p in &mut self.pos {
                if *p > q {
                    *p -= 1;
                }
            }
            bits.push(k as u8);
        }
        self.pos.clear();
        Ok(bits)
    }
}

fn pauli_on(outcomes: &[BellOutcome], qubits: &[usize], n: usize) -> CMatrix {
    let mut ps = vec![PauliByproduct::I; n];
    for (o, &q) in outcomes.iter().zip(qubits) {
        ps[q] = o.correction();
    }
    pauli_string(&ps)
}

fn is_trivial(outcomes: &[BellOutcome]) -> bool {
    outcomes.iter().all(|o| *o == BellOutcome::PhiPlus)
}

struct Protocol<'a> {
    layout: Layout,
    u: CMatrix,
    observable: &'a NonlocalObservable,
}

impl Protocol<'_> {
    /// Runs the rounds on the data qubits at `data` inside `reg`. Returns the
    /// register with the data qubits removed (other qubits keep their order).
    fn run<R: Rng + ?Sized>(
        &self,
        reg: StateVector,
        data: &[QubitId],
        max_rounds: usize,
        pool: &mut ChannelPool,
        rng: &mut R,
    ) -> Result<(StateVector, DemolitionRun)> {
        let n = self.layout.num_qubits();
        let all: Vec<usize> = (0..n).collect();
        let t = MEASUREMENT_TIME;
        let mut tr = Transcript::new(t);
        let mut live = Live { reg, pos: data.to_vec() };
        let mut records = Vec::new();
        // Alice's belief about the operator acting on the data after her last U
        let mut w = matrix::identity(1 << n);
        let mut last_alice: Vec<BellOutcome> = Vec::new();
        let mut eigen_index = None;

        for round in 1..=max_rounds {
            let pairs = self
                .layout
                .pairs_in_round(round)
                .ok_or_else(|| Error::Capacity(format!("channel count of round {round} overflows")))?;
            pool.take(pairs)?;
            let (sent, to_alice_pairs) = if round == 1 {
                (self.layout.bob.clone(), self.layout.bob.len() as u64)
            } else {
                (all.clone(), pairs / 2)
            };
            let to_bob_pairs = pairs - to_alice_pairs;
            let live_in = sent.len() as u64;
            let mut ids = vec![tr.provision(live_in, DEMOLITION_TAG)?];
            let garbage = to_alice_pairs - live_in;
            if garbage > 0 {
                ids.push(tr.provision(garbage, DEMOLITION_TAG)?);
            }
            let to_bob = tr.provision(to_bob_pairs, DEMOLITION_TAG)?;
            ids.push(to_bob);

            let bob = live.half_teleport(&sent, rng)?;
            tr.consume(SiteId::BOB, t, DEMOLITION_TAG, ids[0], live_in)?;
            for o in &bob {
                tr.measurement(SiteId::BOB, t, DEMOLITION_TAG, "bell", o.index() as u64)?;
            }
            let bob_pauli = pauli_on(&bob, &sent, n);

            let k = if round == 1 {
                w = &self.u * &bob_pauli;
                self.u.clone()
            } else {
                let q = pauli_on(&last_alice, &all, n);
                let k = &self.u * w.adjoint() * q.adjoint();
                w = &k * &bob_pauli * &q * &w;
                k
            };
            live.apply(&k);
            tr.local_op(SiteId::ALICE, t, DEMOLITION_TAG, "transform", Vec::new())?;
            if garbage > 0 {
                // Alice's halves of the groups Bob did not use are measured too
                tr.consume(SiteId::ALICE, t, DEMOLITION_TAG, ids[1], garbage)?;
            }

            let alice = live.half_teleport(&all, rng)?;
            tr.consume(SiteId::ALICE, t, DEMOLITION_TAG, to_bob, to_bob_pairs)?;
            for o in &alice {
                tr.measurement(SiteId::ALICE, t, DEMOLITION_TAG, "bell", o.index() as u64)?;
            }

            let success = is_trivial(&bob);
            let last_round = round == max_rounds;
            let z_results = if success || last_round {
                let z = live.measure_z(rng)?;
                for &b in &z {
                    tr.measurement(SiteId::BOB, t, DEMOLITION_TAG, "z", b as u64)?;
                }
                Some(z)
            } else {
                None
            };
            records.push(RoundRecord {
                round_index: round,
                bob_bell_outcomes: bob,
                alice_bell_outcomes: alice.clone(),
                channel_ids_used: ids,
                success,
                z_results,
            });
            last_alice = alice;
            if success {
                eigen_index = Some(reconstruct_outcome(&records, self.observable)?);
                break;
            }
        }
        // reconciliation after the measurement instant
        let bits = 2 * records.iter().map(|r| r.alice_bell_outcomes.len() as u64).sum::<u64>();
        let msg = tr.message(SiteId::ALICE, SiteId::BOB, t + 1.0, t + 2.0, bits, DEMOLITION_TAG)?;
        tr.local_op(SiteId::BOB, t + 2.0, DEMOLITION_TAG, "reconstruct", vec![msg])?;
        Ok((live.reg, DemolitionRun { eigen_index, records, transcript: tr.finalized() }))
    }
}

fn protocol_for(observable: &NonlocalObservable) -> Result<Protocol<'_>> {
    if !observable.is_forward() {
        return Err(domain("demolition_measure needs an all-forward observable; see measure_mixed_direction"));
    }
    let layout = Layout::of(observable)?;
    let u = super::observable::eigenbasis_unitary(observable)?;
    Ok(Protocol { layout, u, observable })
}

/// Demolition measurement of `observable` on `input` within `max_rounds`.
pub fn demolition_measure<R: Rng + ?Sized>(
    observable: &NonlocalObservable,
    input: &StateVector,
    max_rounds: usize,
    pool: &mut ChannelPool,
    rng: &mut R,
) -> Result<DemolitionRun> {
    let run = demolition_attempt(observable, input, max_rounds, pool, rng)?;
    if run.succeeded() {
        Ok(run)
    } else {
        Err(Error::RoundsExhausted { rounds: max_rounds })
    }
}

/// Like [`demolition_measure`] but reports running out of rounds as a run
/// without an eigen-index instead of an error.
pub fn demolition_attempt<R: Rng + ?Sized>(
    observable: &NonlocalObservable,
    input: &StateVector,
    max_rounds: usize,
    pool: &mut ChannelPool,
    rng: &mut R,
) -> Result<DemolitionRun> {
    if max_rounds == 0 {
        return Err(domain("max_rounds must be at least 1"));
    }
    if input.num_qubits() != observable.num_qubits() {
        return Err(domain("input does not match the observable"));
    }
    let p = protocol_for(observable)?;
    if pool.remaining().is_some() {
        let need = p.layout.pairs_required(max_rounds).unwrap_or(u64::MAX);
        pool.ensure(need)?;
    }
    let data: Vec<QubitId> = (0..input.num_qubits()).collect();
    Ok(p.run(input.clone(), &data, max_rounds, pool, rng)?.1)
}

/// Negative control: Bob sends his first Bell outcomes to Alice before her
/// unitary and she corrects them, so round 1 always succeeds, at the price of
/// classical communication before the measurement instant.
pub fn demolition_with_early_message<R: Rng + ?Sized>(
    observable: &NonlocalObservable,
    input: &StateVector,
    rng: &mut R,
) -> Result<DemolitionRun> {
    let p = protocol_for(observable)?;
    let n = p.layout.num_qubits();
    let t = MEASUREMENT_TIME;
    let early = t - 1.0;
    let mut tr = Transcript::new(t);
    let mut live = Live { reg: input.clone(), pos: (0..n).collect() };
    let to_alice = tr.provision(p.layout.bob.len() as u64, DEMOLITION_TAG)?;
    let to_bob = tr.provision(n as u64, DEMOLITION_TAG)?;
    let bob = live.half_teleport(&p.layout.bob, rng)?;
    tr.consume(SiteId::BOB, early, DEMOLITION_TAG, to_alice, p.layout.bob.len() as u64)?;
    for o in &bob {
        tr.measurement(SiteId::BOB, early, DEMOLITION_TAG, "bell", o.index() as u64)?;
    }
    let msg = tr.message(SiteId::BOB, SiteId::ALICE, early, t - 0.5, 2 * bob.len() as u64, DEMOLITION_TAG)?;
    let fix = pauli_on(&bob, &p.layout.bob, n);
    live.apply(&(&p.u * fix.adjoint()));
    tr.local_op(SiteId::ALICE, t, DEMOLITION_TAG, "transform", vec![msg])?;
    let all: Vec<usize> = (0..n).collect();
    let alice = live.half_teleport(&all, rng)?;
    tr.consume(SiteId::ALICE, t, DEMOLITION_TAG, to_bob, n as u64)?;
    for o in &alice {
        tr.measurement(SiteId::ALICE, t, DEMOLITION_TAG, "bell", o.index() as u64)?;
    }
    let z = live.measure_z(rng)?;
    for &b in &z {
        tr.measurement(SiteId::BOB, t, DEMOLITION_TAG, "z", b as u64)?;
    }
    let records = vec![RoundRecord {
        round_index: 1,
        bob_bell_outcomes: bob,
        alice_bell_outcomes: alice,
        channel_ids_used: vec![to_alice, to_bob],
        success: true,
        z_results: Some(z),
    }];
    let eigen_index = Some(reconstruct_outcome(&records, observable)?);
    Ok(DemolitionRun { eigen_index, records, transcript: tr.finalized() })
}

/// A scenario in which `system` (one qubit per observable qubit) is
/// described at time `time` by a state whose backward parts come from the
/// scenario's post-selection.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedDirectionSetup {
    pub scenario: Scenario,
    pub system: Vec<QubitId>,
    pub time: f64,
}

/// An accepted post-selected run of a mixed-direction measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedRun {
    pub run: DemolitionRun,
    pub attempts: u64,
}

/// Reverses every backward-tagged qubit at `setup.time`, then measures the
/// all-forward image of the observable with the demolition protocol, and
/// keeps the first run whose post-selection succeeds.
///
/// Eigen-indices refer to the original (mixed-direction) eigenstates.
pub fn measure_mixed_direction<R: Rng + ?Sized>(
    observable: &NonlocalObservable,
    setup: &MixedDirectionSetup,
    max_rounds: usize,
    max_attempts: u64,
    pool: &mut ChannelPool,
    rng: &mut R,
) -> Result<MixedRun> {
    let prepared = prepare_mixed_direction(observable, setup)?;
    prepared.sample(max_rounds, max_attempts, pool, rng)
}

/// The reversal-augmented scenario, ready for repeated sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedMixed {
    scenario: Scenario,
    data: Vec<QubitId>,
    time: f64,
    forward: NonlocalObservable,
}

pub fn prepare_mixed_direction(observable: &NonlocalObservable, setup: &MixedDirectionSetup) -> Result<PreparedMixed> {
    if setup.system.len() != observable.num_qubits() {
        return Err(domain("one scenario qubit per observable qubit"));
    }
    let mut scenario = setup.scenario.clone();
    let mut data = setup.system.clone();
    for j in observable.backward_qubits() {
        let particle = setup.system[j];
        let anc = scenario.add_qubit(scenario.sites()[particle], &StateVector::up())?;
        time_reverse_backward(&mut scenario, particle, anc, setup.time)?;
        data[j] = anc;
    }
    for (j, &q) in data.iter().enumerate() {
        if scenario.sites()[q] != observable.sites()[j] {
            return Err(domain(format!("qubit {q} does not sit where the observable expects")));
        }
        if scenario.steps_touching(q).any(|s| s.time > setup.time) {
            return Err(Error::Protocol(format!("qubit {q} is used after the measurement time")));
        }
        if scenario.postselections().iter().any(|p| p.targets().contains(&q)) {
            return Err(Error::Protocol(format!("measured qubit {q} is also post-selected")));
        }
    }
    Ok(PreparedMixed { scenario, data, time: setup.time, forward: observable.forward_image() })
}

impl PreparedMixed {
    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn forward_observable(&self) -> &NonlocalObservable {
        &self.forward
    }

    pub fn sample<R: Rng + ?Sized>(
        &self,
        max_rounds: usize,
        max_attempts: u64,
        pool: &mut ChannelPool,
        rng: &mut R,
    ) -> Result<MixedRun> {
        if max_rounds == 0 || max_attempts == 0 {
            return Err(domain("max_rounds and max_attempts must be at least 1"));
        }
        let p = protocol_for(&self.forward)?;
        let n = self.scenario.num_qubits();
        let mut sorted = self.data.clone();
        sorted.sort_unstable();
        for attempt in 1..=max_attempts {
            let out = self.scenario.run_with_interlude(rng, self.time, |reg, rng| {
                let (rest, run) = p.run(reg, &self.data, max_rounds, pool, rng)?;
                let zeros = vec![Complex64::new(0.0, 0.0); 1 << sorted.len()];
                let mut fill = zeros;
                fill[0] = Complex64::new(1.0, 0.0);
                Ok((StateVector::from_raw(n, embed_raw(rest.amplitudes(), n, &sorted, &fill)), run))
            })?;
            if let Some((_, _, run)) = out {
                return Ok(MixedRun { run, attempts: attempt });
            }
        }
        Err(Error::Exhausted { attempts: max_attempts })
    }
}

/// Per-index counts of successful runs and per-round success counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemolitionTally {
    pub index_counts: Vec<u64>,
    pub success_by_round: Vec<u64>,
    pub failures: u64,
    pub trials: u64,
    pub pairs_consumed: u64,
}

impl DemolitionTally {
    pub fn new(outcomes: usize, max_rounds: usize) -> Self {
        Self {
            index_counts: vec![0; outcomes],
            success_by_round: vec![0; max_rounds],
            failures: 0,
            trials: 0,
            pairs_consumed: 0,
        }
    }

    pub fn record(&mut self, run: &DemolitionRun) {
        self.trials += 1;
        self.pairs_consumed += run.transcript.channel_balance(DEMOLITION_TAG).1;
        match run.eigen_index {
            Some(k) => {
                self.index_counts[k] += 1;
                self.success_by_round[run.rounds() - 1] += 1;
            }
            None => self.failures += 1,
        }
    }

    pub fn merge(mut self, other: &Self) -> Self {
        for (a, b) in self.index_counts.iter_mut().zip(&other.index_counts) {
            *a += b;
        }
        for (a, b) in self.success_by_round.iter_mut().zip(&other.success_by_round) {
            *a += b;
        }
        self.failures += other.failures;
        self.trials += other.trials;
        self.pairs_consumed += other.pairs_consumed;
        self
    }

    pub fn successes(&self) -> u64 {
        self.trials - self.failures
    }

    /// Fraction of trials that succeeded within `k` rounds, for `k = 1..`.
    pub fn cumulative_success(&self) -> Vec<f64> {
        let n = self.trials.max(1) as f64;
        self.success_by_round
            .iter()
            .scan(0u64, |acc, &c| {
                *acc += c;
                Some(*acc as f64 / n)
            })
            .collect()
    }
}

/// Runs `trials` independent demolition measurements of `input`, trial `i`
/// on substream `i`.
pub fn demolition_tally(
    observable: &NonlocalObservable,
    input: &StateVector,
    max_rounds: usize,
    trials: u64,
    source: &RandomSource,
) -> Result<DemolitionTally> {
    use rayon::prelude::*;
    let d = observable.eigenstates().len();
    (0..trials)
        .into_par_iter()
        .map(|i| demolition_attempt(observable, input, max_rounds, &mut ChannelPool::unlimited(), &mut source.substream(i)))
        .try_fold(
            || DemolitionTally::new(d, max_rounds),
            |mut t, r| {
                t.record(&r?);
                Ok::<_, Error>(t)
            },
        )
        .try_reduce(|| DemolitionTally::new(d, max_rounds), |a, b| Ok(a.merge(&b)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::check_instantaneity;
    use crate::protocols::reversal::crossed_measurement_scenario;
    use crate::protocols::CrossedMeasurement;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eigenstates_are_identified_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for obs in [NonlocalObservable::crossed_forward(), NonlocalObservable::bell_operator()] {
            for (k, e) in obs.eigenstates().iter().enumerate() {
                for _ in 0..200 {
                    let run = demolition_attempt(&obs, e, 6, &mut ChannelPool::unlimited(), &mut rng).unwrap();
                    if let Some(i) = run.eigen_index {
                        assert_eq!(i, k);
                    }
                    assert!(check_instantaneity(&run.transcript).unwrap().passed());
                    run.transcript.validate().unwrap();
                }
            }
        }
    }

    #[test]
    fn channel_accounting_matches_rounds() {
        let obs = NonlocalObservable::crossed_forward();
        let layout = Layout::of(&obs).unwrap();
        assert_eq!(layout.pairs_in_round(1), Some(3));
        assert_eq!(layout.pairs_in_round(2), Some(3 * 4));
        assert_eq!(layout.pairs_in_round(3), Some(45 * 4));
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            let mut pool = ChannelPool::unlimited();
            let run = demolition_attempt(&obs, &obs.eigenstates()[2], 4, &mut pool, &mut rng).unwrap();
            let expect: u64 = (1..=run.rounds()).map(|r| layout.pairs_in_round(r).unwrap()).sum();
            let (prov, cons) = run.transcript.channel_balance(DEMOLITION_TAG);
            assert_eq!(cons, expect);
            assert_eq!(prov, cons);
            assert_eq!(pool.used(), expect);
        }
        let mut small = ChannelPool::with_pairs(10);
        let r = demolition_attempt(&obs, &obs.eigenstates()[0], 3, &mut small, &mut rng);
        assert!(matches!(r, Err(Error::Resource(_))));
    }

    #[test]
    fn reconstruction_undoes_flips_only() {
        let obs = NonlocalObservable::crossed_forward();
        for a in BellOutcome::ALL {
            let flip = a.correction().x_bit() as u8;
            let rec = RoundRecord {
                round_index: 1,
                bob_bell_outcomes: vec![BellOutcome::PhiPlus],
                alice_bell_outcomes: vec![a, BellOutcome::PhiPlus],
                channel_ids_used: vec![],
                success: true,
                z_results: Some(vec![1 ^ flip, 0]),
            };
            assert_eq!(reconstruct_outcome(&[rec], &obs).unwrap(), 1);
        }
        assert!(reconstruct_outcome(&[], &obs).is_err());
    }

    #[test]
    fn early_message_is_flagged() {
        let obs = NonlocalObservable::bell_operator();
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let run = demolition_with_early_message(&obs, &obs.eigenstates()[3], &mut rng).unwrap();
        assert_eq!(run.eigen_index, Some(3));
        let v = check_instantaneity(&run.transcript).unwrap();
        assert!(v.violations().iter().any(|x| matches!(x, crate::ledger::Violation::EarlyMessage { .. })));
    }

    #[test]
    fn mixed_direction_crossed_measurement() {
        let mixed = NonlocalObservable::crossed_mixed();
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        for (o1, o2) in [(2, None), (-2, None), (0, Some(0)), (0, Some(2))] {
            let cm = crossed_measurement_scenario(o1, o2).unwrap();
            let setup = MixedDirectionSetup {
                scenario: cm.scenario.clone(),
                system: vec![CrossedMeasurement::A, CrossedMeasurement::B],
                time: crate::protocols::reversal::CROSSED_T,
            };
            let prepared = prepare_mixed_direction(&mixed, &setup).unwrap();
            let mut hits = 0;
            for _ in 0..100 {
                let r = prepared.sample(8, 100_000, &mut ChannelPool::unlimited(), &mut rng).unwrap();
                if let Some(k) = r.run.eigen_index {
                    assert_eq!(k, cm.eigen_index(), "({o1}, {o2:?})");
                    hits += 1;
                }
            }
            assert!(hits > 20);
        }
    }
}
