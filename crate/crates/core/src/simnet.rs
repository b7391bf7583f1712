//! Deterministic discrete-event network.
//!
//! Delivery times are chosen by an [`AdversarySchedule`] that is a pure
//! function of its seed and the message identity, so a run is reproducible
//! from `(NetworkModel, AdversarySchedule)` alone. Events that fall on the
//! same tick are delivered in send order.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::{mix_all, pick};
use crate::ledger::Tick;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParticipantId(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    PartialSynchrony,
    Synchrony,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NetError {
    #[error("delta must be positive")]
    ZeroDelta,
    #[error("synchronous networks have gst 0, got {0}")]
    SyncWithGst(Tick),
    #[error("unknown participant {0:?}")]
    UnknownParticipant(ParticipantId),
    #[error("send time {send} is before the current time {now}")]
    SendInPast { send: Tick, now: Tick },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkModel {
    pub mode: Mode,
    pub delta: Tick,
    pub gst: Tick,
}

impl NetworkModel {
    pub fn partial_synchrony(delta: Tick, gst: Tick) -> Result<NetworkModel, NetError> {
        NetworkModel { mode: Mode::PartialSynchrony, delta, gst }.validated()
    }

    pub fn synchrony(delta: Tick) -> Result<NetworkModel, NetError> {
        NetworkModel { mode: Mode::Synchrony, delta, gst: 0 }.validated()
    }

    pub fn validated(self) -> Result<NetworkModel, NetError> {
        if self.delta == 0 {
            return Err(NetError::ZeroDelta);
        }
        if self.mode == Mode::Synchrony && self.gst != 0 {
            return Err(NetError::SyncWithGst(self.gst));
        }
        Ok(self)
    }

    /// Latest tick at which a message sent at `send` may be delivered.
    pub fn deadline(&self, send: Tick) -> Tick {
        send.max(self.gst) + self.delta
    }
}

/// How the adversary picks delays within the allowed window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayPolicy {
    /// Random, with extra weight on the two ends of the window.
    Biased,
    /// Always the latest legal tick.
    Max,
    /// Always immediate.
    Min,
    /// A fixed delay, capped by the deadline.
    Fixed(Tick),
}

/// A set of participants cut off from everyone else until GST.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub members: BTreeSet<ParticipantId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversarySchedule {
    pub seed: u64,
    pub policy: DelayPolicy,
    #[serde(default)]
    pub partitions: Vec<Partition>,
}

impl AdversarySchedule {
    pub fn new(seed: u64) -> AdversarySchedule {
        AdversarySchedule { seed, policy: DelayPolicy::Biased, partitions: Vec::new() }
    }

    pub fn with_policy(mut self, policy: DelayPolicy) -> AdversarySchedule {
        self.policy = policy;
        self
    }

    pub fn with_partition<I: IntoIterator<Item = ParticipantId>>(mut self, members: I) -> AdversarySchedule {
        self.partitions.push(Partition { members: members.into_iter().collect() });
        self
    }

    fn separated(&self, a: ParticipantId, b: ParticipantId) -> bool {
        self.partitions.iter().any(|p| p.members.contains(&a) != p.members.contains(&b))
    }

    /// Delivery tick for one message. `key` distinguishes messages on the
    /// same link sent at the same tick.
    pub fn delivery(&self, net: &NetworkModel, send: Tick, from: ParticipantId, to: ParticipantId, key: u64) -> Tick {
        let deadline = net.deadline(send);
        if send < net.gst && self.separated(from, to) {
            return deadline;
        }
        match self.policy {
            DelayPolicy::Max => deadline,
            DelayPolicy::Min => send,
            DelayPolicy::Fixed(d) => (send + d).min(deadline),
            DelayPolicy::Biased => {
                let r = mix_all(&[self.seed, from.0, to.0, send, key]);
                match pick(r, 8) {
                    0..=2 => deadline,
                    3 => send,
                    _ => send + pick(r.rotate_left(29), deadline - send + 1),
                }
            }
        }
    }
}

/// Message payloads name their kind for trace export.
pub trait MessageKind {
    fn kind(&self) -> String;
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Envelope<M> {
    pub seq: u64,
    pub sender: ParticipantId,
    pub recipient: ParticipantId,
    pub payload: M,
    pub send_time: Tick,
    pub deliver_time: Tick,
}

/// One line of the exported trace.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub tick: Tick,
    pub sender: ParticipantId,
    pub recipient: ParticipantId,
    pub kind: String,
}

pub struct SimNet<M> {
    model: NetworkModel,
    schedule: AdversarySchedule,
    participants: BTreeSet<ParticipantId>,
    queue: BinaryHeap<Reverse<(Tick, u64)>>,
    pending: std::collections::HashMap<u64, Envelope<M>>,
    next_seq: u64,
    now: Tick,
    trace: Vec<TraceEvent>,
}

impl<M: Clone + MessageKind> SimNet<M> {
    pub fn new(model: NetworkModel, schedule: AdversarySchedule) -> SimNet<M> {
        SimNet {
            model,
            schedule,
            participants: BTreeSet::new(),
            queue: BinaryHeap::new(),
            pending: Default::default(),
            next_seq: 0,
            now: 0,
            trace: Vec::new(),
        }
    }

    pub fn model(&self) -> &NetworkModel {
        &self.model
    }

    pub fn now(&self) -> Tick {
        self.now
    }

    pub fn add_participant(&mut self, p: ParticipantId) {
        self.participants.insert(p);
    }

    /// Schedules a message; the adversary fixes its delivery time.
    pub fn send(&mut self, sender: ParticipantId, recipient: ParticipantId, payload: M, send_time: Tick) -> Result<Envelope<M>, NetError> {
        for p in [sender, recipient] {
            if !self.participants.contains(&p) {
                return Err(NetError::UnknownParticipant(p));
            }
        }
        if send_time < self.now {
            return Err(NetError::SendInPast { send: send_time, now: self.now });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        let deliver_time = self.schedule.delivery(&self.model, send_time, sender, recipient, seq);
        let env = Envelope { seq, sender, recipient, payload, send_time, deliver_time };
        self.queue.push(Reverse((deliver_time, seq)));
        self.pending.insert(seq, env.clone());
        Ok(env)
    }

    /// Delivers every message due at or before `t`, in (tick, sequence) order.
    pub fn run_until(&mut self, t: Tick) -> Vec<Envelope<M>> {
        let mut out = Vec::new();
        while let Some(Reverse((at, seq))) = self.queue.peek().copied() {
            if at > t {
                break;
            }
            self.queue.pop();
            let env = self.pending.remove(&seq).expect("queued envelope");
            self.trace.push(TraceEvent {
                tick: env.deliver_time,
                sender: env.sender,
                recipient: env.recipient,
                kind: env.payload.kind(),
            });
            out.push(env);
        }
        self.now = self.now.max(t);
        out
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    /// Trace as JSON lines.
    pub fn trace_jsonl(&self) -> String {
        let mut s = String::new();
        for ev in &self.trace {
            s.push_str(&serde_json::to_string(ev).expect("trace event serializes"));
            s.push('\n');
        }
        s
    }
}
