//! Append-only protocol transcripts.
//!
//! A [`Transcript`] records what happened where and when: local operations
//! and measurements, the permanent records they leave, classical messages and
//! entanglement consumption. Two checks run on finalized transcripts:
//! [`check_instantaneity`] and the resource counters [`count_channels`] and
//! [`classical_bits_sent_by`].
//!
//! Export is line-delimited JSON, one event per line. The digest is the
//! lowercase hex SHA-256 of that export (header line included).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SiteId(pub u32);

impl SiteId {
    pub const ALICE: SiteId = SiteId(0);
    pub const BOB: SiteId = SiteId(1);
}

impl fmt::Display for SiteId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            0 => f.write_str("A"),
            1 => f.write_str("B"),
            n => write!(f, "S{n}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MessageId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChannelId(pub u64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    LocalOp {
        label: String,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        depends_on: Vec<MessageId>,
    },
    LocalMeasurement {
        label: String,
        outcome: u64,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        depends_on: Vec<MessageId>,
    },
    RecordWritten {
        measurement: EventId,
    },
    ClassicalSend {
        message: MessageId,
        to: SiteId,
        bits: u64,
    },
    ClassicalReceive {
        message: MessageId,
    },
    /// Consumption of a provisioned channel block (`pairs` EPR pairs).
    ChannelConsumed {
        channel: ChannelId,
        pairs: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub id: EventId,
    pub site: SiteId,
    pub time: f64,
    pub tag: String,
    #[serde(flatten)]
    pub kind: EventKind,
}

/// A block of pre-shared EPR pairs available to a protocol run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provision {
    pub channel: ChannelId,
    pub pairs: u64,
    pub tag: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    measurement_time: f64,
    events: Vec<Event>,
    provisions: Vec<Provision>,
    finalized: bool,
    next_event: u64,
    next_message: u64,
    next_channel: u64,
}

impl Transcript {
    pub fn new(measurement_time: f64) -> Self {
        Self {
            measurement_time,
            events: Vec::new(),
            provisions: Vec::new(),
            finalized: false,
            next_event: 0,
            next_message: 0,
            next_channel: 0,
        }
    }

    pub fn measurement_time(&self) -> f64 {
        self.measurement_time
    }

    pub fn is_finalized(&self) -> bool {
        self.finalized
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn provisions(&self) -> &[Provision] {
        &self.provisions
    }

    fn ensure_open(&self) -> Result<()> {
        if self.finalized {
            return Err(Error::State("transcript is finalized".into()));
        }
        Ok(())
    }

    pub fn record(&mut self, site: SiteId, time: f64, tag: &str, kind: EventKind) -> Result<EventId> {
        self.ensure_open()?;
        let id = EventId(self.next_event);
        self.next_event += 1;
        self.events.push(Event { id, site, time, tag: tag.to_owned(), kind });
        Ok(id)
    }

    pub fn provision(&mut self, pairs: u64, tag: &str) -> Result<ChannelId> {
        self.ensure_open()?;
        let channel = ChannelId(self.next_channel);
        self.next_channel += 1;
        self.provisions.push(Provision { channel, pairs, tag: tag.to_owned() });
        Ok(channel)
    }

    /// Registers a channel id allocated elsewhere (e.g. by a scenario).
    pub fn provision_with_id(&mut self, channel: ChannelId, pairs: u64, tag: &str) -> Result<()> {
        self.ensure_open()?;
        if self.provisions.iter().any(|p| p.channel == channel) {
            return Err(domain(format!("channel {} provisioned twice", channel.0)));
        }
        self.next_channel = self.next_channel.max(channel.0 + 1);
        self.provisions.push(Provision { channel, pairs, tag: tag.to_owned() });
        Ok(())
    }

    pub fn new_message(&mut self) -> MessageId {
        let m = MessageId(self.next_message);
        self.next_message += 1;
        m
    }

    /// Records a local measurement together with the permanent record it leaves.
    pub fn measurement(&mut self, site: SiteId, time: f64, tag: &str, label: &str, outcome: u64) -> Result<EventId> {
        let m = self.record(
            site,
            time,
            tag,
            EventKind::LocalMeasurement { label: label.to_owned(), outcome, depends_on: Vec::new() },
        )?;
        self.record(site, time, tag, EventKind::RecordWritten { measurement: m })?;
        Ok(m)
    }

    pub fn local_op(&mut self, site: SiteId, time: f64, tag: &str, label: &str, depends_on: Vec<MessageId>) -> Result<EventId> {
        self.record(site, time, tag, EventKind::LocalOp { label: label.to_owned(), depends_on })
    }

    pub fn consume(&mut self, site: SiteId, time: f64, tag: &str, channel: ChannelId, pairs: u64) -> Result<EventId> {
        self.record(site, time, tag, EventKind::ChannelConsumed { channel, pairs })
    }

    /// Records a message sent at `sent` and received at `received`.
    pub fn message(
        &mut self,
        from: SiteId,
        to: SiteId,
        sent: f64,
        received: f64,
        bits: u64,
        tag: &str,
    ) -> Result<MessageId> {
        let message = self.new_message();
        self.record(from, sent, tag, EventKind::ClassicalSend { message, to, bits })?;
        self.record(to, received, tag, EventKind::ClassicalReceive { message })?;
        Ok(message)
    }

    /// Appends all events and provisions of `other`, renumbering ids.
    pub fn absorb(&mut self, other: &Transcript) -> Result<()> {
        self.ensure_open()?;
        let ev_base = self.next_event;
        let msg_base = self.next_message;
        let ch_base = self.next_channel;
        for p in &other.provisions {
            self.provisions.push(Provision { channel: ChannelId(p.channel.0 + ch_base), ..p.clone() });
        }
        for e in &other.events {
            let mut e = e.clone();
            e.id = EventId(e.id.0 + ev_base);
            match &mut e.kind {
                EventKind::LocalOp { depends_on, .. } | EventKind::LocalMeasurement { depends_on, .. } => {
                    depends_on.iter_mut().for_each(|m| m.0 += msg_base)
                }
                EventKind::RecordWritten { measurement } => measurement.0 += ev_base,
                EventKind::ClassicalSend { message, .. } | EventKind::ClassicalReceive { message } => {
                    message.0 += msg_base
                }
                EventKind::ChannelConsumed { channel, .. } => channel.0 += ch_base,
            }
            self.events.push(e);
        }
        self.next_event += other.next_event;
        self.next_message += other.next_message;
        self.next_channel += other.next_channel;
        Ok(())
    }

    /// Sorts events by time (ties broken by site, then insertion order) and
    /// freezes the transcript.
    pub fn finalize(&mut self) {
        if self.finalized {
            return;
        }
        self.events
            .sort_by(|a, b| a.time.total_cmp(&b.time).then(a.site.cmp(&b.site)).then(a.id.cmp(&b.id)));
        self.finalized = true;
    }

    pub fn finalized(mut self) -> Self {
        self.finalize();
        self
    }

    fn ensure_final(&self) -> Result<()> {
        if !self.finalized {
            return Err(Error::State("transcript is not finalized".into()));
        }
        Ok(())
    }

    /// Line-delimited JSON: a header line, then one event per line.
    pub fn export_jsonl(&self) -> Result<String> {
        self.ensure_final()?;
        #[derive(Serialize)]
        struct Header<'a> {
            measurement_time: f64,
            provisions: &'a [Provision],
        }
        let mut out = serde_json::to_string(&Header {
            measurement_time: self.measurement_time,
            provisions: &self.provisions,
        })
        .expect("header serializes");
        out.push('\n');
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("event serializes"));
            out.push('\n');
        }
        Ok(out)
    }

    pub fn digest(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.export_jsonl()?.as_bytes())))
    }

    /// Structural invariants: message causality and channel accounting.
    pub fn validate(&self) -> Result<()> {
        let mut sends: BTreeMap<MessageId, f64> = BTreeMap::new();
        let mut receives: BTreeMap<MessageId, f64> = BTreeMap::new();
        let mut consumed: BTreeMap<ChannelId, u64> = BTreeMap::new();
        for e in &self.events {
            match &e.kind {
                EventKind::ClassicalSend { message, .. } => {
                    if sends.insert(*message, e.time).is_some() {
                        return Err(Error::Protocol(format!("message {} sent twice", message.0)));
                    }
                }
                EventKind::ClassicalReceive { message } => {
                    if receives.insert(*message, e.time).is_some() {
                        return Err(Error::Protocol(format!("message {} received twice", message.0)));
                    }
                }
                EventKind::ChannelConsumed { channel, pairs } => {
                    let prov = self
                        .provisions
                        .iter()
                        .find(|p| p.channel == *channel)
                        .ok_or_else(|| Error::Resource(format!("channel {} was never provisioned", channel.0)))?;
                    if consumed.insert(*channel, *pairs).is_some() {
                        return Err(Error::Resource(format!("channel {} consumed twice", channel.0)));
                    }
                    if *pairs > prov.pairs {
                        return Err(Error::Resource(format!("channel {} over-consumed", channel.0)));
                    }
                }
                _ => {}
            }
        }
        for (m, t) in &receives {
            match sends.get(m) {
                Some(s) if s < t => {}
                Some(_) => return Err(Error::Protocol(format!("message {} received before it was sent", m.0))),
                None => return Err(Error::Protocol(format!("message {} received but never sent", m.0))),
            }
        }
        Ok(())
    }

    /// (provisioned, consumed) pair counts for `tag`.
    pub fn channel_balance(&self, tag: &str) -> (u64, u64) {
        let provisioned = self.provisions.iter().filter(|p| p.tag == tag).map(|p| p.pairs).sum();
        let consumed = self
            .events
            .iter()
            .filter(|e| e.tag == tag)
            .filter_map(|e| match e.kind {
                EventKind::ChannelConsumed { pairs, .. } => Some(pairs),
                _ => None,
            })
            .sum();
        (provisioned, consumed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    /// A record needed for reconstruction is missing at measurement time or
    /// was written away from the site of its measurement.
    RecordNotLocal { event: EventId },
    RecordNotAtMeasurementTime { event: EventId, time: f64 },
    /// A local action at measurement time depends on a classical message.
    EarlyMessage { message: MessageId, op: EventId },
    /// A local action depends on a message never delivered to its site beforehand.
    UndeliveredMessage { message: MessageId, op: EventId },
    ReceiveBeforeSend { message: MessageId },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Violations(Vec<Violation>),
}

impl Verdict {
    pub fn passed(&self) -> bool {
        matches!(self, Verdict::Pass)
    }

    pub fn violations(&self) -> &[Violation] {
        match self {
            Verdict::Pass => &[],
            Verdict::Violations(v) => v,
        }
    }
}

/// Checks that a protocol leaves local permanent records at the measurement
/// time without relying on classical communication up to that time.
///
/// Influence is tracked through explicit `depends_on` edges from operations
/// to message ids, not by timing.
pub fn check_instantaneity(transcript: &Transcript) -> Result<Verdict> {
    transcript.ensure_final()?;
    let t = transcript.measurement_time;
    let by_id: BTreeMap<EventId, &Event> = transcript.events.iter().map(|e| (e.id, e)).collect();
    let mut sends: BTreeMap<MessageId, f64> = BTreeMap::new();
    let mut receives: BTreeMap<MessageId, (SiteId, f64)> = BTreeMap::new();
    for e in &transcript.events {
        match &e.kind {
            EventKind::ClassicalSend { message, .. } => {
                sends.insert(*message, e.time);
            }
            EventKind::ClassicalReceive { message } => {
                receives.insert(*message, (e.site, e.time));
            }
            _ => {}
        }
    }
    let mut violations = Vec::new();
    let mut seen = BTreeSet::new();
    for (m, (_, rt)) in &receives {
        if sends.get(m).is_none_or(|st| st >= rt) {
            violations.push(Violation::ReceiveBeforeSend { message: *m });
        }
    }
    for e in &transcript.events {
        match &e.kind {
            EventKind::RecordWritten { measurement } => {
                if e.time != t {
                    violations.push(Violation::RecordNotAtMeasurementTime { event: e.id, time: e.time });
                }
                match by_id.get(measurement) {
                    Some(m) if m.site == e.site && matches!(m.kind, EventKind::LocalMeasurement { .. }) => {}
                    _ => violations.push(Violation::RecordNotLocal { event: e.id }),
                }
            }
            EventKind::LocalOp { depends_on, .. } | EventKind::LocalMeasurement { depends_on, .. } => {
                for m in depends_on {
                    match receives.get(m) {
                        Some((site, rt)) if *site == e.site && *rt <= e.time => {
                            if e.time <= t && seen.insert((*m, e.id)) {
                                violations.push(Violation::EarlyMessage { message: *m, op: e.id });
                            }
                        }
                        _ => violations.push(Violation::UndeliveredMessage { message: *m, op: e.id }),
                    }
                }
            }
            _ => {}
        }
    }
    Ok(if violations.is_empty() { Verdict::Pass } else { Verdict::Violations(violations) })
}

/// Number of EPR pairs consumed under `tag`.
pub fn count_channels(transcript: &Transcript, tag: &str) -> Result<u64> {
    transcript.ensure_final()?;
    let known = transcript.events.iter().any(|e| e.tag == tag) || transcript.provisions.iter().any(|p| p.tag == tag);
    if !known {
        return Err(domain(format!("unknown protocol tag {tag:?}")));
    }
    Ok(transcript.channel_balance(tag).1)
}

/// Classical bits sent at or before `cutoff`.
pub fn classical_bits_sent_by(transcript: &Transcript, cutoff: f64) -> Result<u64> {
    transcript.ensure_final()?;
    Ok(transcript
        .events
        .iter()
        .filter(|e| e.time <= cutoff)
        .filter_map(|e| match e.kind {
            EventKind::ClassicalSend { bits, .. } => Some(bits),
            _ => None,
        })
        .sum())
}
