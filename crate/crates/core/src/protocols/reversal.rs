use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::ledger::SiteId;
use crate::qcore::matrix::{self, c, CMatrix};
use crate::qcore::{BellOutcome, PauliByproduct, QubitId, StateVector};
use crate::tsv::{scenario_for_gtsv, ChannelKind, GeneralizedTwoStateVector, Scenario, ScenarioChannel, StepId, StepKind};

/// The time-reversal map `α⟨↑| + β⟨↓| → −β*|↑⟩ + α*|↓⟩` applied to a
/// backward state stored as its ket `α|↑⟩ + β|↓⟩`.
pub fn reversed_state(backward: &StateVector) -> Result<StateVector> {
    let n = backward.num_qubits();
    backward.conj().apply_byproduct(&vec![PauliByproduct::XZ; n], &(0..n).collect::<Vec<_>>())
}

fn check_undisturbed(scenario: &Scenario, particle: QubitId, t: f64) -> Result<()> {
    if !scenario.postselections().iter().any(|p| p.targets().contains(&particle)) {
        return Err(Error::Protocol(format!("qubit {particle} is never post-selected")));
    }
    if let Some(s) = scenario.steps_touching(particle).find(|s| s.time > t && !s.apparatus) {
        return Err(Error::Protocol(format!(
            "step {} disturbs qubit {particle} at time {} after the reversal at {t}",
            s.id.0, s.time
        )));
    }
    Ok(())
}

/// Inserts, at time `t`, the Bell measurement plus local correction that
/// leaves `(particle, ancilla)` in the singlet. Conditioned on the later
/// post-selection of the particle onto `|φ⟩`, the ancilla then carries
/// [`reversed_state`]`(φ)` forward in time.
pub fn time_reverse_backward(scenario: &mut Scenario, particle: QubitId, ancilla: QubitId, t: f64) -> Result<StepId> {
    if particle == ancilla {
        return Err(domain("particle and ancilla coincide"));
    }
    let n = scenario.num_qubits();
    if particle >= n || ancilla >= n {
        return Err(domain("qubit out of range"));
    }
    if scenario.sites()[particle] != scenario.sites()[ancilla] {
        return Err(domain("time reversal is local: ancilla must sit with the particle"));
    }
    if scenario.steps_touching(ancilla).any(|s| s.time <= t) {
        return Err(Error::Protocol(format!("ancilla {ancilla} is not fresh at time {t}")));
    }
    check_undisturbed(scenario, particle, t)?;
    scenario.insert_step(scenario.sites()[particle], t, StepKind::PrepareSinglet { pair: (particle, ancilla) })
}

/// Outcome of trying to reverse a forward-evolving state by a single Bell
/// measurement with half of a fresh `PhiPlus` pair.
#[derive(Debug, Clone, PartialEq)]
pub enum ForwardReversal {
    /// The pair `(qubit, ancilla)` was found in the singlet; the ancilla's
    /// backward state is the reverse of the input and its partner carries
    /// `XZ ψ` forward.
    Success { state: StateVector, ancilla: QubitId, partner: QubitId },
    Failure(BellOutcome),
}

impl ForwardReversal {
    pub fn succeeded(&self) -> bool {
        matches!(self, Self::Success { .. })
    }
}

/// Appends a `PhiPlus` pair `(ancilla, partner)` and Bell-measures
/// `(qubit, ancilla)`. Only the singlet outcome counts; nothing afterwards
/// can repair the others.
pub fn attempt_reverse_forward<R: Rng + ?Sized>(state: &StateVector, qubit: QubitId, rng: &mut R) -> Result<ForwardReversal> {
    let n = state.num_qubits();
    let st = state.tensor(&ChannelKind::PhiPlus.state())?;
    let (o, post) = st.bell_measure((qubit, n), rng)?;
    Ok(match o {
        BellOutcome::PsiMinus => ForwardReversal::Success { state: post, ancilla: n, partner: n + 1 },
        other => ForwardReversal::Failure(other),
    })
}

/// A backward state relocated by one pre-shared singlet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackwardMove {
    pub channel: Option<ScenarioChannel>,
    /// Qubit at the destination carrying the reversed state forward.
    pub forward_qubit: QubitId,
    pub swapped: bool,
}

/// Moves the backward state of `particle` to `target` at time `t` while
/// reversing its time direction, using exactly one singlet and no classical
/// communication.
///
/// When the particle is untouched by the timeline it becomes a member of the
/// pre-shared pair itself; otherwise a local swap at its site exchanges it
/// with the near half of a fresh pair.
pub fn move_backward_state(scenario: &mut Scenario, particle: QubitId, target: SiteId, t: f64) -> Result<BackwardMove> {
    if particle >= scenario.num_qubits() {
        return Err(domain("qubit out of range"));
    }
    check_undisturbed(scenario, particle, t)?;
    let here = scenario.sites()[particle];
    let direct = scenario.steps_touching(particle).next().is_none() && scenario.preselection().factor(&[particle]).is_some();
    let (ch, swapped) = if direct {
        (scenario.attach_partner(particle, target, ChannelKind::Singlet)?, false)
    } else {
        let ch = scenario.add_singlet_channel(target, here)?;
        scenario.insert_step(here, t, StepKind::Unitary { matrix: matrix::swap(), targets: vec![ch.qubits.1, particle] })?;
        (ch, true)
    };
    scenario.insert_step(here, t, StepKind::Channel { channel: ch.id })?;
    Ok(BackwardMove { forward_qubit: ch.qubits.0, channel: Some(ch), swapped })
}

/// Brings the backward states of `particles` to `target`: local reversal
/// with a fresh ancilla for particles already there, one channel for every
/// other particle. Forward qubits are returned in particle order.
pub fn consolidate_backward(scenario: &mut Scenario, particles: &[QubitId], target: SiteId, t: f64) -> Result<Vec<BackwardMove>> {
    let mut moves = Vec::with_capacity(particles.len());
    for &p in particles {
        if p >= scenario.num_qubits() {
            return Err(domain("qubit out of range"));
        }
        if scenario.sites()[p] == target {
            let anc = scenario.add_qubit(target, &StateVector::up())?;
            time_reverse_backward(scenario, p, anc, t)?;
            moves.push(BackwardMove { channel: None, forward_qubit: anc, swapped: false });
        } else {
            moves.push(move_backward_state(scenario, p, target, t)?);
        }
    }
    Ok(moves)
}

/// The all-forward `2N`-part image of a generalized two-state vector:
/// `Σ_t c_t |K_t⟩ ⊗ XZ^{⊗n} |B_t*⟩`, kets on the low qubits.
pub fn generalized_forward_image(g: &GeneralizedTwoStateVector) -> Result<StateVector> {
    let n = g.num_qubits();
    let d = 1usize << n;
    let mut amps = vec![Complex64::new(0.0, 0.0); d * d];
    for (t, term) in g.terms().iter().enumerate() {
        let k = g.term_ket(t)?;
        let b = reversed_state(&g.term_bra(t)?)?;
        for i in 0..d {
            for j in 0..d {
                amps[j | (i << n)] += term.coefficient * k.amplitude(j) * b.amplitude(i);
            }
        }
    }
    StateVector::normalized(2 * n, amps)
}

/// Scenario realizing a generalized two-state vector, with every part
/// split at time `t` into a forward memory (swapped out locally) and a
/// backward part brought to site 0.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedConsolidation {
    pub scenario: Scenario,
    pub memories: Vec<QubitId>,
    pub moves: Vec<BackwardMove>,
}

impl GeneralizedConsolidation {
    /// Memories followed by the reversed backward parts, matching
    /// [`generalized_forward_image`].
    pub fn forward_qubits(&self) -> Vec<QubitId> {
        let mut q = self.memories.clone();
        q.extend(self.moves.iter().map(|m| m.forward_qubit));
        q
    }
}

pub fn consolidate_generalized(g: &GeneralizedTwoStateVector, t: f64) -> Result<GeneralizedConsolidation> {
    let mut scenario = scenario_for_gtsv(g)?;
    let n = g.num_qubits();
    let mut memories = Vec::with_capacity(n);
    for q in 0..n {
        let site = scenario.sites()[q];
        let m = scenario.add_qubit(site, &StateVector::up())?;
        scenario.insert_step(site, t, StepKind::Unitary { matrix: matrix::swap(), targets: vec![q, m] })?;
        memories.push(m);
    }
    let system: Vec<QubitId> = (0..n).collect();
    let moves = consolidate_backward(&mut scenario, &system, SiteId(0), t)?;
    Ok(GeneralizedConsolidation { scenario, memories, moves })
}

pub const CROSSED_T1: f64 = 1.0;
pub const CROSSED_T: f64 = 2.0;
pub const CROSSED_T2: f64 = 3.0;
pub const CROSSED_EPS: f64 = 0.25;
const POINTER_SITE: SiteId = SiteId(2);

/// Pre/post-selection built from the two crossed nonlocal-in-time
/// measurements `O1 = σz^A(t1) − σz^B(t2)` and
/// `O2 = (σx^A(t1−ε) − σx^B(t2+ε)) mod 4`, post-selected on one outcome pair.
///
/// Each measurement is a pointer coupled to A at the earlier time and to B
/// at the later one. Qubit 0 is A, qubit 1 is B; the pointers follow.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossedMeasurement {
    pub scenario: Scenario,
    pub o1: i32,
    pub o2: Option<i32>,
}

impl CrossedMeasurement {
    pub const A: QubitId = 0;
    pub const B: QubitId = 1;

    /// Index of the matching eigenstate in [`super::NonlocalObservable::crossed_mixed`].
    pub fn eigen_index(&self) -> usize {
        match (self.o1, self.o2) {
            (2, _) => 0,
            (-2, _) => 1,
            (_, Some(0)) => 2,
            _ => 3,
        }
    }

    /// Adds the time reversal of B at `t − ε` with a fresh ancilla at B and
    /// returns the ancilla.
    pub fn reverse_b(&mut self) -> Result<QubitId> {
        let anc = self.scenario.add_qubit(SiteId::BOB, &StateVector::up())?;
        time_reverse_backward(&mut self.scenario, Self::B, anc, CROSSED_T - CROSSED_EPS)?;
        Ok(anc)
    }
}

/// `pointer += sign · s` (mod 4) where `s` is the z bit of the control;
/// local qubit 0 is the control, qubits 1–2 the pointer.
fn shift_pointer(sign: i64) -> CMatrix {
    let mut m = CMatrix::zeros(8, 8);
    for i in 0..8usize {
        let s = (i & 1) as i64;
        let v = (i >> 1) as i64;
        let w = (v + sign * s).rem_euclid(4) as usize;
        m[((w << 1) | (i & 1), i)] = c(1.0, 0.0);
    }
    m
}

/// `pointer ^= x` where `x` is the σx bit of the control (local qubit 0).
fn flip_on_x() -> CMatrix {
    let h = matrix::kron_qubits(&[matrix::hadamard(), matrix::identity(2)]);
    &h * matrix::cnot() * &h
}

pub fn crossed_measurement_scenario(o1: i32, o2: Option<i32>) -> Result<CrossedMeasurement> {
    let valid = match o1 {
        2 | -2 => matches!(o2, None | Some(0) | Some(2)),
        0 => matches!(o2, Some(0) | Some(2)),
        _ => false,
    };
    if !valid {
        return Err(domain(format!("no crossed-measurement outcome ({o1}, {o2:?})")));
    }
    let psi_a = StateVector::qubit(c(0.8, 0.0), c(0.0, 0.6))?;
    let psi_b = StateVector::qubit(c(0.6, 0.0), c(0.8, 0.0))?;
    let chi_b = StateVector::qubit(c(0.4f64.cos(), 0.0), Complex64::from_polar(0.4f64.sin(), 0.9))?;
    let pre = psi_a.tensor(&psi_b)?.tensor(&StateVector::basis_state(3, 0)?)?;
    let sites = vec![SiteId::ALICE, SiteId::BOB, POINTER_SITE, POINTER_SITE, POINTER_SITE];
    let (a, b, p1, p2) = (CrossedMeasurement::A, CrossedMeasurement::B, [2, 3], 4);
    let mut s = Scenario::new(pre, sites)?;
    let eps = CROSSED_EPS;
    s.insert_apparatus_step(SiteId::ALICE, CROSSED_T1 - eps, StepKind::Unitary { matrix: flip_on_x(), targets: vec![a, p2] })?;
    s.insert_apparatus_step(SiteId::ALICE, CROSSED_T1, StepKind::Unitary { matrix: shift_pointer(-1), targets: vec![a, p1[0], p1[1]] })?;
    s.insert_apparatus_step(SiteId::BOB, CROSSED_T2, StepKind::Unitary { matrix: shift_pointer(1), targets: vec![b, p1[0], p1[1]] })?;
    s.insert_apparatus_step(SiteId::BOB, CROSSED_T2 + eps, StepKind::Unitary { matrix: flip_on_x(), targets: vec![b, p2] })?;
    // pointer 1 reads (s_B − s_A) mod 4 = O1 / 2; pointer 2 reads O2 / 2
    let v1 = (o1 / 2).rem_euclid(4) as usize;
    s.postselect_state(StateVector::basis_state(2, v1)?, p1.to_vec())?;
    if let Some(v) = o2 {
        s.postselect_state(StateVector::basis_state(1, (v / 2) as usize)?, vec![p2])?;
    }
    s.postselect_state(chi_b, vec![b])?;
    Ok(CrossedMeasurement { scenario: s, o1, o2 })
}
