use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::ledger::{ChannelId, SiteId, Transcript};
use crate::qcore::{BellOutcome, PauliByproduct, QubitId, StateVector};
use crate::tsv::ChannelKind;

/// A pre-shared EPR pair living in a register.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelPair {
    pub id: ChannelId,
    /// (half at the sending site, half at the receiving site)
    pub qubits: (QubitId, QubitId),
    pub sites: (SiteId, SiteId),
    pub kind: ChannelKind,
    pub consumed: bool,
}

impl ChannelPair {
    /// Appends a fresh pair to `state`, first half at `from`, second at `to`.
    pub fn attach(state: &StateVector, id: ChannelId, kind: ChannelKind, from: SiteId, to: SiteId) -> Result<(StateVector, Self)> {
        let q = state.num_qubits();
        let out = state.tensor(&kind.state())?;
        Ok((out, Self { id, qubits: (q, q + 1), sites: (from, to), kind, consumed: false }))
    }

    /// Byproduct the remote half carries after outcome `o`.
    pub fn byproduct(&self, o: BellOutcome) -> PauliByproduct {
        o.correction().then(self.kind.frame())
    }
}

/// Result of a (half or complete) teleportation of several qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct TeleportRun {
    pub outcomes: Vec<BellOutcome>,
    pub state: StateVector,
    /// Remote qubits now carrying the sources, in source order.
    pub remote: Vec<QubitId>,
    pub transcript: Transcript,
}

pub const TELEPORT_TAG: &str = "teleport";

fn check_channels(state: &StateVector, sources: &[QubitId], channels: &[ChannelPair]) -> Result<()> {
    if sources.len() != channels.len() {
        return Err(Error::Resource(format!("{} sources need {} channels, got {}", sources.len(), sources.len(), channels.len())));
    }
    if let Some(c) = channels.iter().find(|c| c.consumed) {
        return Err(Error::Resource(format!("channel {} already consumed", c.id.0)));
    }
    let mut all: Vec<QubitId> = sources.to_vec();
    all.extend(channels.iter().flat_map(|c| [c.qubits.0, c.qubits.1]));
    let mut sorted = all.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != all.len() || sorted.last().is_some_and(|&q| q >= state.num_qubits()) {
        return Err(domain("sources and channel qubits must be distinct qubits of the register"));
    }
    Ok(())
}

/// Bell measurements of each source with the near half of its channel,
/// without sending the outcomes or correcting the far halves.
pub fn half_teleport<R: Rng + ?Sized>(
    state: &StateVector,
    sources: &[QubitId],
    channels: &mut [ChannelPair],
    time: f64,
    rng: &mut R,
) -> Result<TeleportRun> {
    check_channels(state, sources, channels)?;
    let mut transcript = Transcript::new(time);
    let mut st = state.clone();
    let mut outcomes = Vec::with_capacity(sources.len());
    for (&s, ch) in sources.iter().zip(channels.iter_mut()) {
        let (o, post) = st.bell_measure((s, ch.qubits.0), rng)?;
        st = post;
        ch.consumed = true;
        transcript.provision_with_id(ch.id, 1, TELEPORT_TAG)?;
        transcript.consume(ch.sites.0, time, TELEPORT_TAG, ch.id, 1)?;
        transcript.measurement(ch.sites.0, time, TELEPORT_TAG, "bell", o.index() as u64)?;
        outcomes.push(o);
    }
    let remote = channels.iter().map(|c| c.qubits.1).collect();
    Ok(TeleportRun { outcomes, state: st, remote, transcript })
}

/// Half-teleportation followed by two classical bits per qubit and the
/// Pauli correction at the receiving site one time unit later.
pub fn complete_teleport<R: Rng + ?Sized>(
    state: &StateVector,
    sources: &[QubitId],
    channels: &mut [ChannelPair],
    time: f64,
    rng: &mut R,
) -> Result<TeleportRun> {
    let mut run = half_teleport(state, sources, channels, time, rng)?;
    let mut transcript = run.transcript.clone();
    for (o, ch) in run.outcomes.iter().zip(channels.iter()) {
        let fix = ch.byproduct(*o);
        run.state = run.state.apply_byproduct(&[fix], &[ch.qubits.1])?;
        let msg = transcript.message(ch.sites.0, ch.sites.1, time, time + 1.0, 2, TELEPORT_TAG)?;
        transcript.local_op(ch.sites.1, time + 1.0, TELEPORT_TAG, "pauli-correction", vec![msg])?;
    }
    run.transcript = transcript.finalized();
    Ok(run)
}

impl TeleportRun {
    /// Freezes the transcript of a half-teleportation.
    pub fn finalized(mut self) -> Self {
        self.transcript.finalize();
        self
    }
}
