//! The omission-fault-tolerant overlay protocol run by the lvl gate.
//!
//! [`OftValidator`] is a pure state machine. It is fed transactions,
//! observed messages and timer ticks in order and records the messages it
//! emits. The lvl gate replays one validator per child chain from that
//! chain's ledger; [`OftNetwork`] runs `2f + 1` validators directly over a
//! [`SimNet`] and serves as a reference.

use std::collections::{BTreeMap, BTreeSet};

use rustc_hash::{FxHashMap as HashMap, FxHashSet as HashSet};
use std::sync::Arc;

use serde::Serialize;

use crate::digest::Digest;
use crate::ledger::{Ledger, Tick, Tx, TxId};
use crate::simnet::{AdversarySchedule, MessageKind, NetworkModel, ParticipantId, SimNet};

pub fn leader_of(epoch: u64, n: usize) -> usize {
    (epoch % n as u64) as usize
}

/// Epoch schedule shared by all validators of one instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct EpochTiming {
    /// Maximal message delay the protocol waits for.
    pub delta: Tick,
    pub epoch_len: Tick,
}

impl EpochTiming {
    /// Epochs last `3 * delta`, rounded up to a multiple of `block_time`.
    pub fn new(delta: Tick, block_time: Tick) -> EpochTiming {
        assert!(delta > 0 && block_time > 0);
        EpochTiming { delta, epoch_len: (3 * delta).div_ceil(block_time) * block_time }
    }

    pub fn enter(&self, v: u64) -> Tick {
        v * self.epoch_len
    }

    pub fn ack(&self, v: u64) -> Tick {
        self.enter(v) + self.delta
    }

    pub fn leader_down(&self, v: u64) -> Tick {
        self.enter(v) + 2 * self.delta
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Phase {
    Enter,
    Ack,
    Down,
}

pub struct OverlayBlock {
    pub digest: Digest,
    pub parent: Option<Arc<OverlayBlock>>,
    pub height: u64,
    pub epoch: u64,
    pub proposer: usize,
    /// Transactions new in this block.
    pub txs: Vec<Tx>,
    /// All transactions from genesis through this block.
    pub ledger: Ledger,
}

impl std::fmt::Debug for OverlayBlock {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "B(h{} e{} {:?} {})", self.height, self.epoch, self.digest, self.ledger)
    }
}

impl OverlayBlock {
    pub fn genesis() -> Arc<OverlayBlock> {
        Arc::new(OverlayBlock {
            digest: Digest::ZERO,
            parent: None,
            height: 0,
            epoch: 0,
            proposer: 0,
            txs: Vec::new(),
            ledger: Ledger::empty(),
        })
    }

    pub fn child(parent: &Arc<OverlayBlock>, epoch: u64, proposer: usize, txs: Vec<Tx>) -> Arc<OverlayBlock> {
        let ledger = parent.ledger.extended(txs.iter().cloned());
        let digest = parent
            .digest
            .chain(parent.height + 1)
            .chain(epoch)
            .chain(proposer as u64)
            .chain(ledger.digest().0);
        Arc::new(OverlayBlock { digest, parent: Some(parent.clone()), height: parent.height + 1, epoch, proposer, txs, ledger })
    }

    /// True if `self` is `ancestor` or one of its descendants.
    pub fn extends(&self, ancestor: &OverlayBlock) -> bool {
        let mut cur = self;
        while cur.height > ancestor.height {
            match &cur.parent {
                Some(p) => cur = p,
                None => return false,
            }
        }
        cur.digest == ancestor.digest
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OftKind {
    Propose,
    Ack,
    LeaderDown,
}

#[derive(Clone, Debug)]
pub struct OftMessage {
    pub kind: OftKind,
    pub from: usize,
    pub epoch: u64,
    pub block: Arc<OverlayBlock>,
    /// Epoch the carried block was acknowledged in (leader-down), or `epoch`.
    pub block_epoch: u64,
    /// Senders of the acks or leader-downs that justify a proposal.
    pub ticket: Vec<usize>,
}

impl OftMessage {
    fn key(&self) -> (usize, OftKind, u64, Digest) {
        (self.from, self.kind, self.epoch, self.block.digest)
    }
}

impl MessageKind for Arc<OftMessage> {
    fn kind(&self) -> String {
        format!("{:?}", self.kind).to_lowercase()
    }
}

/// One line of a validator's message log.
#[derive(Clone, Debug, Serialize)]
pub struct LogLine {
    pub kind: OftKind,
    pub from: usize,
    pub epoch: u64,
    pub height: u64,
    pub block: Digest,
}

#[derive(Clone, Debug)]
pub struct OftValidator {
    me: usize,
    n: usize,
    timing: EpochTiming,
    mempool: Vec<Tx>,
    mempool_ids: HashSet<TxId>,
    emitted: Vec<Arc<OftMessage>>,
    seen: HashSet<(usize, OftKind, u64, Digest)>,
    proposals: BTreeMap<u64, Arc<OftMessage>>,
    acks: HashMap<(u64, Digest), BTreeMap<usize, Arc<OftMessage>>>,
    downs: HashMap<u64, BTreeMap<usize, Arc<OftMessage>>>,
    highest_acked: (Arc<OverlayBlock>, u64),
    commits: Vec<Arc<OverlayBlock>>,
    next: (u64, Phase),
    clock: Tick,
}

impl OftValidator {
    pub fn new(me: usize, n: usize, timing: EpochTiming) -> OftValidator {
        assert!(n % 2 == 1 && me < n, "need n = 2f + 1 validators");
        OftValidator {
            me,
            n,
            timing,
            mempool: Vec::new(),
            mempool_ids: HashSet::default(),
            emitted: Vec::new(),
            seen: HashSet::default(),
            proposals: BTreeMap::new(),
            acks: HashMap::default(),
            downs: HashMap::default(),
            highest_acked: (OverlayBlock::genesis(), 0),
            commits: Vec::new(),
            next: (1, Phase::Enter),
            clock: 0,
        }
    }

    pub fn id(&self) -> usize {
        self.me
    }

    fn quorum(&self) -> usize {
        self.n / 2 + 1
    }

    pub fn clock(&self) -> Tick {
        self.clock
    }

    pub fn emitted(&self) -> &[Arc<OftMessage>] {
        &self.emitted
    }

    /// Committed blocks in commit order.
    pub fn commits(&self) -> &[Arc<OverlayBlock>] {
        &self.commits
    }

    /// Highest-epoch committed block, or genesis.
    pub fn tip(&self) -> Arc<OverlayBlock> {
        self.commits.iter().max_by_key(|b| (b.epoch, b.height)).cloned().unwrap_or_else(OverlayBlock::genesis)
    }

    pub fn log(&self) -> Vec<LogLine> {
        self.emitted
            .iter()
            .map(|m| LogLine { kind: m.kind, from: m.from, epoch: m.epoch, height: m.block.height, block: m.block.digest })
            .collect()
    }

    fn next_time(&self) -> Tick {
        let (v, p) = self.next;
        match p {
            Phase::Enter => self.timing.enter(v),
            Phase::Ack => self.timing.ack(v),
            Phase::Down => self.timing.leader_down(v),
        }
    }

    /// Fires every timer strictly before `t`.
    pub fn advance_before(&mut self, t: Tick) {
        while self.next_time() < t {
            self.fire();
        }
        self.clock = self.clock.max(t.saturating_sub(1));
    }

    /// Fires every timer at or before `t`.
    pub fn advance_to(&mut self, t: Tick) {
        while self.next_time() <= t {
            self.fire();
        }
        self.clock = self.clock.max(t);
    }

    fn fire(&mut self) {
        let (v, p) = self.next;
        self.clock = self.clock.max(self.next_time());
        match p {
            Phase::Enter => {
                self.on_enter(v);
                self.next = (v, Phase::Ack);
            }
            Phase::Ack => {
                self.on_ack_time(v);
                self.next = (v, Phase::Down);
            }
            Phase::Down => {
                self.on_leader_down_time(v);
                self.next = (v + 1, Phase::Enter);
            }
        }
    }

    pub fn on_tx(&mut self, tx: Tx) {
        if self.mempool_ids.insert(tx.id) {
            self.mempool.push(tx);
        }
    }

    /// The block certified for epoch `v`, if `f + 1` matching acks were seen.
    pub fn certified(&self, v: u64) -> Option<Arc<OverlayBlock>> {
        if v == 0 {
            return Some(OverlayBlock::genesis());
        }
        self.acks
            .iter()
            .filter(|((e, _), set)| *e == v && set.len() >= self.quorum())
            .map(|(_, set)| set.values().next().expect("nonempty").block.clone())
            .max_by_key(|b| b.digest)
    }

    fn on_enter(&mut self, v: u64) {
        if leader_of(v, self.n) != self.me {
            return;
        }
        let (parent, ticket) = if let Some(b) = self.certified(v - 1) {
            let ticket = if v == 1 { Vec::new() } else { self.acks[&(v - 1, b.digest)].keys().copied().collect() };
            (b, ticket)
        } else {
            match self.downs.get(&(v - 1)) {
                Some(d) if d.len() >= self.quorum() => {
                    let best = d.values().max_by_key(|m| (m.block_epoch, m.block.digest)).expect("nonempty");
                    (best.block.clone(), d.keys().copied().collect())
                }
                _ => return,
            }
        };
        let txs: Vec<Tx> = self.mempool.iter().filter(|t| !parent.ledger.contains(t.id)).cloned().collect();
        let block = OverlayBlock::child(&parent, v, self.me, txs);
        self.emit(OftKind::Propose, v, block, v, ticket);
    }

    fn on_ack_time(&mut self, v: u64) {
        if let Some(p) = self.proposals.get(&v) {
            let block = p.block.clone();
            self.highest_acked = (block.clone(), v);
            self.emit(OftKind::Ack, v, block, v, Vec::new());
        }
    }

    fn on_leader_down_time(&mut self, v: u64) {
        if self.certified(v).is_none() {
            let (block, e) = self.highest_acked.clone();
            self.emit(OftKind::LeaderDown, v, block, e, Vec::new());
        }
    }

    fn emit(&mut self, kind: OftKind, epoch: u64, block: Arc<OverlayBlock>, block_epoch: u64, ticket: Vec<usize>) {
        let msg = Arc::new(OftMessage { kind, from: self.me, epoch, block, block_epoch, ticket });
        self.emitted.push(msg.clone());
        self.observe(msg);
    }

    /// Records a message from any validator, including this one.
    pub fn observe(&mut self, msg: Arc<OftMessage>) {
        if msg.from >= self.n || !self.seen.insert(msg.key()) {
            return;
        }
        let v = msg.epoch;
        match msg.kind {
            OftKind::Propose => {
                if msg.from != leader_of(v, self.n) {
                    return;
                }
                // a second proposal for the same epoch can only come from a forked chain; keep the first
                self.proposals.entry(v).or_insert_with(|| msg.clone());
            }
            OftKind::Ack => {
                self.acks.entry((v, msg.block.digest)).or_default().insert(msg.from, msg.clone());
            }
            OftKind::LeaderDown => {
                self.downs.entry(v).or_default().insert(msg.from, msg.clone());
            }
        }
        self.try_commit(v);
    }

    fn try_commit(&mut self, v: u64) {
        let Some(p) = self.proposals.get(&v) else { return };
        let ok = self.acks.get(&(v, p.block.digest)).is_some_and(|s| s.len() >= self.quorum());
        if ok && !self.commits.iter().any(|b| b.digest == p.block.digest) {
            self.commits.push(p.block.clone());
        }
    }
}

/// Blocks committed by at least `quorum` of the given validators (or with
/// a committed descendant), keeping only the maximal ones, ordered by
/// height, then epoch, then digest.
pub fn quorum_blocks(tips: &[Vec<Arc<OverlayBlock>>], quorum: usize) -> Vec<Arc<OverlayBlock>> {
    let mut candidates: BTreeMap<Digest, Arc<OverlayBlock>> = BTreeMap::new();
    for commits in tips {
        for b in commits {
            let mut cur = Some(b.clone());
            while let Some(c) = cur {
                if c.height == 0 || candidates.contains_key(&c.digest) {
                    break;
                }
                cur = c.parent.clone();
                candidates.insert(c.digest, c);
            }
        }
    }
    let support = |b: &OverlayBlock| tips.iter().filter(|cs| cs.iter().any(|c| c.extends(b))).count();
    let supported: Vec<Arc<OverlayBlock>> = candidates.into_values().filter(|b| support(b) >= quorum).collect();
    let mut maximal: Vec<Arc<OverlayBlock>> = supported
        .iter()
        .filter(|b| !supported.iter().any(|o| o.digest != b.digest && o.extends(b)))
        .cloned()
        .collect();
    maximal.sort_by_key(|b| (b.height, b.epoch, b.digest));
    maximal
}

/// Direct `2f + 1` validator deployment over the network simulator.
pub struct OftNetwork {
    net: SimNet<Arc<OftMessage>>,
    validators: Vec<OftValidator>,
    crashed: BTreeSet<usize>,
    now: Tick,
}

impl OftNetwork {
    pub fn new(f: usize, model: NetworkModel, schedule: AdversarySchedule, block_time: Tick) -> OftNetwork {
        let n = 2 * f + 1;
        let timing = EpochTiming::new(model.delta, block_time);
        let mut net = SimNet::new(model, schedule);
        for i in 0..n {
            net.add_participant(ParticipantId(i as u64));
        }
        OftNetwork { net, validators: (0..n).map(|i| OftValidator::new(i, n, timing)).collect(), crashed: BTreeSet::new(), now: 0 }
    }

    /// Silences a validator for the rest of the run.
    pub fn crash(&mut self, i: usize) {
        self.crashed.insert(i);
    }

    pub fn validators(&self) -> &[OftValidator] {
        &self.validators
    }

    pub fn input(&mut self, tx: Tx) {
        for (i, v) in self.validators.iter_mut().enumerate() {
            if !self.crashed.contains(&i) {
                v.on_tx(tx.clone());
            }
        }
    }

    /// Runs through tick `t`: messages due at a tick are observed before
    /// that tick's timers fire.
    pub fn run_until(&mut self, t: Tick) {
        while self.now <= t {
            let now = self.now;
            for env in self.net.run_until(now) {
                let to = env.recipient.0 as usize;
                if !self.crashed.contains(&to) {
                    self.validators[to].observe(env.payload);
                }
            }
            for i in 0..self.validators.len() {
                if self.crashed.contains(&i) {
                    continue;
                }
                let before = self.validators[i].emitted().len();
                self.validators[i].advance_to(now);
                let fresh: Vec<Arc<OftMessage>> = self.validators[i].emitted()[before..].to_vec();
                for m in fresh {
                    for j in 0..self.validators.len() {
                        if j != i {
                            self.net
                                .send(ParticipantId(i as u64), ParticipantId(j as u64), m.clone(), now)
                                .expect("registered participants");
                        }
                    }
                }
            }
            self.now += 1;
        }
    }

    /// Output of a client that accepts blocks committed by `f + 1` validators.
    pub fn client_output(&self) -> Ledger {
        let live: Vec<Vec<Arc<OverlayBlock>>> = self.validators.iter().map(|v| v.commits().to_vec()).collect();
        let quorum = self.validators.len() / 2 + 1;
        quorum_blocks(&live, quorum)
            .iter()
            .fold(Ledger::empty(), |acc, b| crate::ledger::merge_monotone(&acc, &b.ledger))
    }

    pub fn trace_jsonl(&self) -> String {
        self.net.trace_jsonl()
    }
}
