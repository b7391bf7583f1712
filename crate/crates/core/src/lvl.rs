//! The lvl gate: one OFT validator emulated on each child chain.
//!
//! Validator `j` is a contract whose state is a deterministic replay of the
//! entries this gate wrote into child `j`:
//!
//! * `Forward(tx)` puts `tx` into the validator's mempool;
//! * `Relay { from: i, view }` carries a certified view of child `i`; the
//!   contract replays validator `i` on that view and observes every message
//!   `i` emitted;
//! * `Heartbeat` only moves the contract clock.
//!
//! A timer at time `x` fires after every entry stamped `x` or earlier and
//! before the first later entry; timers up to the view's head fire at the
//! end. An invalid entry (bad certificate, unknown or self sender) halts the
//! validator: the rest of that ledger is ignored.

use std::cell::RefCell;
use std::sync::Arc;

use rustc_hash::FxHashMap as HashMap;

use crate::cert::{CertRegistry, Issuer};
use crate::digest::{mix_all, Digest};
use crate::gate::{GateId, GateMsg, GateTx};
use crate::ledger::{merge_monotone, Ledger, Tick};
use crate::oft::{quorum_blocks, EpochTiming, LogLine, OftValidator, OverlayBlock};
use crate::simnet::ParticipantId;
use crate::view::View;
use crate::world::{NodeId, World};

const CHECKPOINTS: usize = 8;

/// A validator after replaying one view of its child.
#[derive(Clone, Debug)]
pub struct Replayed {
    pub validator: OftValidator,
    /// Position of the entry that halted the validator.
    pub halted_at: Option<usize>,
}

#[derive(Clone)]
struct Checkpoint {
    origin: u64,
    len: usize,
    digest: Digest,
    state: Replayed,
}

#[derive(Default)]
struct ReplayCache {
    checkpoints: HashMap<usize, Vec<Checkpoint>>,
    finals: HashMap<(usize, u64, usize, Digest, Tick), Arc<Replayed>>,
}

pub(crate) struct Replayer<'a> {
    gate: GateId,
    n: usize,
    timing: EpochTiming,
    issuers: &'a [Issuer],
    registry: &'a CertRegistry,
    cache: &'a mut ReplayCache,
}

impl Replayer<'_> {
    fn replay(&mut self, j: usize, view: &View) -> Arc<Replayed> {
        let key = (j, view.origin, view.len(), view.ledger.digest(), view.head);
        if let Some(r) = self.cache.finals.get(&key) {
            return r.clone();
        }
        let start = self
            .cache
            .checkpoints
            .get(&j)
            .and_then(|cps| {
                cps.iter()
                    .filter(|c| c.origin == view.origin && c.len <= view.len() && view.ledger.prefix_digest(c.len) == c.digest)
                    .max_by_key(|c| c.len)
            })
            .map(|c| (c.len, c.state.clone()));
        let (from, mut state) =
            start.unwrap_or_else(|| (0, Replayed { validator: OftValidator::new(j, self.n, self.timing), halted_at: None }));
        for k in from..view.len() {
            if state.halted_at.is_some() {
                break;
            }
            let tx = view.ledger.get(k).expect("in range");
            let Some(g) = tx.gate() else { continue };
            if g.gate != self.gate {
                continue;
            }
            state.validator.advance_before(view.stamp(k));
            match &g.msg {
                GateMsg::Forward(inner) => state.validator.on_tx(inner.clone()),
                GateMsg::Relay { from, view: rv } => {
                    let i = *from as usize;
                    let valid = i < self.n
                        && i != j
                        && rv.cert.as_ref().is_some_and(|c| {
                            c.issuer == self.issuers[i] && self.registry.verify(c, &rv.ledger, rv.head)
                        });
                    if !valid {
                        state.halted_at = Some(k);
                        continue;
                    }
                    let other = self.replay(i, rv);
                    for m in other.validator.emitted() {
                        state.validator.observe(m.clone());
                    }
                }
                GateMsg::Heartbeat | GateMsg::Snapshot(_) => {}
            }
        }
        let cps = self.cache.checkpoints.entry(j).or_default();
        if !cps.iter().any(|c| c.origin == view.origin && c.len == view.len()) {
            if cps.len() >= CHECKPOINTS {
                cps.remove(0);
            }
            cps.push(Checkpoint { origin: view.origin, len: view.len(), digest: view.ledger.digest(), state: state.clone() });
        }
        if state.halted_at.is_none() {
            state.validator.advance_to(view.head);
        }
        let out = Arc::new(state);
        self.cache.finals.insert(key, out.clone());
        out
    }
}

#[derive(Default)]
struct LvlState {
    cache: ReplayCache,
    relayed: HashMap<(usize, usize), (u64, usize, Tick)>,
    outputs: HashMap<ParticipantId, (Tick, View)>,
    prev: HashMap<ParticipantId, Ledger>,
}

pub struct LvlGate {
    pub(crate) id: GateId,
    pub(crate) issuer: Issuer,
    pub(crate) children: Vec<NodeId>,
    child_issuers: Vec<Issuer>,
    composite: Vec<bool>,
    timing: EpochTiming,
    writers: Vec<ParticipantId>,
    state: RefCell<LvlState>,
}

impl LvlGate {
    pub(crate) fn new(
        id: GateId,
        issuer: Issuer,
        children: Vec<NodeId>,
        child_issuers: Vec<Issuer>,
        composite: Vec<bool>,
        timing: EpochTiming,
    ) -> LvlGate {
        let writers = (0..children.len()).map(|j| ParticipantId(mix_all(&[id.0 as u64, 0x3a, j as u64]))).collect();
        LvlGate { id, issuer, children, child_issuers, composite, timing, writers, state: RefCell::new(LvlState::default()) }
    }

    pub fn timing(&self) -> EpochTiming {
        self.timing
    }

    pub(crate) fn writer_roles(&self) -> Vec<crate::world::Writer> {
        let n = self.children.len();
        (0..n)
            .map(|j| crate::world::Writer {
                participant: self.writers[j],
                reads: (0..n).filter(|i| *i != j).map(|i| self.children[i]).collect(),
                writes: self.children[j],
            })
            .collect()
    }

    pub fn f(&self) -> usize {
        self.children.len() / 2
    }

    fn replay_all(&self, world: &World, views: &[View]) -> Vec<Arc<Replayed>> {
        let registry = world.registry();
        let mut st = self.state.borrow_mut();
        let mut r = Replayer {
            gate: self.id,
            n: self.children.len(),
            timing: self.timing,
            issuers: &self.child_issuers,
            registry: &registry,
            cache: &mut st.cache,
        };
        views.iter().enumerate().map(|(j, v)| r.replay(j, v)).collect()
    }

    pub(crate) fn write(&self, world: &World, t: Tick) {
        let n = self.children.len();
        for j in 0..n {
            if self.composite[j] {
                let hb = GateTx::wrap(self.id, &[0x4b, j as u64, t], GateMsg::Heartbeat, t);
                world.submit_quiet(self.children[j], hb, t);
            }
            for i in 0..n {
                if i == j {
                    continue;
                }
                let rv = world.view(self.children[i], self.writers[j], t);
                if rv.cert.is_none() {
                    continue;
                }
                let mark = (rv.origin, rv.len(), rv.head);
                let mut st = self.state.borrow_mut();
                if st.relayed.get(&(j, i)) == Some(&mark) {
                    continue;
                }
                st.relayed.insert((j, i), mark);
                drop(st);
                let key = [0x7e, j as u64, i as u64, rv.origin, rv.len() as u64, rv.head, rv.ledger.digest().0];
                let tx = GateTx::wrap(self.id, &key, GateMsg::Relay { from: i as u32, view: rv }, t);
                world.submit_quiet(self.children[j], tx, t);
            }
        }
    }

    pub(crate) fn read(&self, world: &World, observer: ParticipantId, t: Tick) -> View {
        if let Some((at, v)) = self.state.borrow().outputs.get(&observer) {
            if *at == t {
                return v.clone();
            }
        }
        let views: Vec<View> = self.children.iter().map(|c| world.view(*c, observer, t)).collect();
        let replayed = self.replay_all(world, &views);
        let commits: Vec<Vec<Arc<OverlayBlock>>> = replayed.iter().map(|r| r.validator.commits().to_vec()).collect();
        let prev = self.state.borrow().prev.get(&observer).cloned().unwrap_or_default();
        let out = quorum_blocks(&commits, self.f() + 1).iter().fold(prev, |acc, b| merge_monotone(&acc, &b.ledger));
        let view = world.certify(self.issuer, out.clone());
        let mut st = self.state.borrow_mut();
        st.prev.insert(observer, out);
        st.outputs.insert(observer, (t, view.clone()));
        view
    }

    /// Per-validator message logs as replayed from `observer`'s views at `t`.
    pub fn logs(&self, world: &World, observer: ParticipantId, t: Tick) -> Vec<Vec<LogLine>> {
        let views: Vec<View> = self.children.iter().map(|c| world.view(*c, observer, t)).collect();
        self.replay_all(world, &views).iter().map(|r| r.validator.log()).collect()
    }

    /// Replayed validators as seen from `observer`'s views at `t`.
    pub fn validators(&self, world: &World, observer: ParticipantId, t: Tick) -> Vec<Arc<Replayed>> {
        let views: Vec<View> = self.children.iter().map(|c| world.view(*c, observer, t)).collect();
        self.replay_all(world, &views)
    }
}
