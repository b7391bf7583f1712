//! A composition tree of underlay chains and gates, driven tick by tick.
//!
//! Nodes are created children first, so the arena order is a topological
//! order. Each tick runs in three phases: the caller submits transactions,
//! [`World::step`] lets every chain produce its block and then every gate
//! write into its children, and finally clients read.

use std::cell::{Ref, RefCell, RefMut};
use std::collections::{BTreeSet, VecDeque};

use rustc_hash::FxHashMap as HashMap;
use thiserror::Error;

use crate::cert::{CertRegistry, Issuer, SoundnessBreach};
use crate::digest::{mix_all, Digest};
use crate::gate::{addressed, forwarded, GateId, GateMsg, GateTx};
use crate::ledger::{clean, interleave, merge_monotone, Ledger, Tick, Tx};
use crate::lvl::LvlGate;
use crate::oft::EpochTiming;
use crate::simnet::{Mode, NetworkModel, ParticipantId};
use crate::underlay::{ChainAdversary, ChainConfig, ChainError, UnderlayChain};
use crate::view::View;

pub type NodeId = usize;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WorldError {
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("{gate} gate needs certificate-generating children; node {child} does not generate certificates")]
    Uncertified { gate: &'static str, child: NodeId },
    #[error("{gate} gate takes {expected} children, got {got}")]
    Arity { gate: &'static str, expected: String, got: usize },
    #[error(transparent)]
    Chain(#[from] ChainError),
}

/// A participant that gates use to read children and write into one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Writer {
    pub participant: ParticipantId,
    pub reads: Vec<NodeId>,
    pub writes: NodeId,
}

pub enum Node {
    Leaf(RefCell<UnderlayChain>),
    Serial(SerialGate),
    Lvl(LvlGate),
    Lvs(LvsGate),
}

pub struct World {
    net: NetworkModel,
    nodes: Vec<Node>,
    registry: RefCell<CertRegistry>,
    warnings: Vec<String>,
}

impl World {
    pub fn new(net: NetworkModel) -> World {
        World { net, nodes: Vec::new(), registry: RefCell::new(CertRegistry::new()), warnings: Vec::new() }
    }

    pub fn network(&self) -> &NetworkModel {
        &self.net
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn breaches(&self) -> Vec<SoundnessBreach> {
        self.registry.borrow().breaches().to_vec()
    }

    pub(crate) fn registry(&self) -> Ref<'_, CertRegistry> {
        self.registry.borrow()
    }

    pub fn leaf(&self, id: NodeId) -> Option<Ref<'_, UnderlayChain>> {
        match self.nodes.get(id) {
            Some(Node::Leaf(c)) => Some(c.borrow()),
            _ => None,
        }
    }

    pub fn leaf_mut(&self, id: NodeId) -> Option<RefMut<'_, UnderlayChain>> {
        match self.nodes.get(id) {
            Some(Node::Leaf(c)) => Some(c.borrow_mut()),
            _ => None,
        }
    }

    pub fn issuer(&self, id: NodeId) -> Issuer {
        Issuer(id as u32)
    }

    /// Whether the node's views carry certificates.
    pub fn certifying(&self, id: NodeId) -> bool {
        match &self.nodes[id] {
            Node::Leaf(c) => c.borrow().config().certifying,
            _ => true,
        }
    }

    fn check(&self, id: NodeId) -> Result<(), WorldError> {
        if id < self.nodes.len() {
            Ok(())
        } else {
            Err(WorldError::UnknownNode(id))
        }
    }

    pub fn add_leaf(&mut self, cfg: ChainConfig, adversary: ChainAdversary) -> Result<NodeId, WorldError> {
        let id = self.nodes.len();
        let issuer = Issuer(id as u32);
        if cfg.safe && cfg.certifying {
            self.registry.borrow_mut().declare_safe(issuer);
        }
        let chain = UnderlayChain::new(cfg, issuer, self.net.gst, adversary)?;
        self.nodes.push(Node::Leaf(RefCell::new(chain)));
        Ok(id)
    }

    /// Serial composition: `a`'s certified outputs are checkpointed into `b`.
    pub fn add_serial(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, WorldError> {
        self.check(a)?;
        self.check(b)?;
        for c in [a, b] {
            if !self.certifying(c) {
                return Err(WorldError::Uncertified { gate: "serial", child: c });
            }
        }
        Ok(self.push_serial(a, b, true))
    }

    /// Serial composition that accepts snapshots without certificates.
    /// Unsafe by construction; exists to reproduce the attack on it.
    pub fn add_serial_without_certificates(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, WorldError> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.push_serial(a, b, false))
    }

    fn push_serial(&mut self, a: NodeId, b: NodeId, checked: bool) -> NodeId {
        let id = self.nodes.len();
        let g = GateId(id as u32);
        let writers = [0u64, 1].map(|p| ParticipantId(mix_all(&[id as u64, 0x5e, p])));
        self.nodes.push(Node::Serial(SerialGate {
            id: g,
            issuer: Issuer(id as u32),
            a,
            b,
            a_issuer: Issuer(a as u32),
            checked,
            writers,
            state: RefCell::new(SerialState::default()),
        }));
        id
    }

    /// Left fold of serial compositions over `children`.
    pub fn add_serial_chain(&mut self, children: &[NodeId]) -> Result<NodeId, WorldError> {
        let (first, rest) = children
            .split_first()
            .ok_or(WorldError::Arity { gate: "serial", expected: "at least 1".into(), got: 0 })?;
        let mut acc = *first;
        self.check(acc)?;
        for c in rest {
            acc = self.add_serial(acc, *c)?;
        }
        Ok(acc)
    }

    /// The lvl gate over `2f + 1` children.
    pub fn add_lvl(&mut self, children: &[NodeId]) -> Result<NodeId, WorldError> {
        if children.len() < 3 || children.len().is_multiple_of(2) {
            return Err(WorldError::Arity { gate: "lvl", expected: "2f + 1 >= 3".into(), got: children.len() });
        }
        for c in children {
            self.check(*c)?;
            if !self.certifying(*c) {
                return Err(WorldError::Uncertified { gate: "lvl", child: *c });
            }
        }
        let composite: Vec<bool> = children.iter().map(|c| !matches!(self.nodes[*c], Node::Leaf(_))).collect();
        // composite children have no block clock; messages through them take up to two bounds
        let delta = children
            .iter()
            .zip(&composite)
            .map(|(c, comp)| if *comp { 2 * self.bound(*c) } else { self.bound(*c) })
            .max()
            .expect("nonempty");
        let block_time = children
            .iter()
            .map(|c| match &self.nodes[*c] {
                Node::Leaf(ch) => ch.borrow().config().epoch,
                _ => 1,
            })
            .max()
            .expect("nonempty");
        let id = self.nodes.len();
        let gate = LvlGate::new(
            GateId(id as u32),
            Issuer(id as u32),
            children.to_vec(),
            children.iter().map(|c| Issuer(*c as u32)).collect(),
            composite,
            EpochTiming::new(delta, block_time),
        );
        self.nodes.push(Node::Lvl(gate));
        Ok(id)
    }

    /// The lvs gate. Its guarantees only hold under synchrony; under
    /// partial synchrony it is built with a warning.
    pub fn add_lvs(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, WorldError> {
        self.check(a)?;
        self.check(b)?;
        let id = self.nodes.len();
        if self.net.mode == Mode::PartialSynchrony {
            self.warnings.push(format!("lvs gate {id} built under partial synchrony: its guarantees do not apply"));
        }
        let lag = self.bound(a).max(self.bound(b));
        self.nodes.push(Node::Lvs(LvsGate {
            id: GateId(id as u32),
            issuer: Issuer(id as u32),
            a,
            b,
            lag,
            state: RefCell::new(LvsState::default()),
        }));
        Ok(id)
    }

    /// The writers of gate `id`; empty for leaves and lvs gates.
    pub fn writers(&self, id: NodeId) -> Vec<Writer> {
        match &self.nodes[id] {
            Node::Serial(s) => s.writers.iter().map(|p| Writer { participant: *p, reads: vec![s.a], writes: s.b }).collect(),
            Node::Lvl(l) => l.writer_roles(),
            Node::Leaf(_) | Node::Lvs(_) => Vec::new(),
        }
    }

    /// Latency bound after GST derived from the tree.
    pub fn bound(&self, id: NodeId) -> Tick {
        match &self.nodes[id] {
            Node::Leaf(c) => c.borrow().config().tconf,
            Node::Serial(s) => 2 * self.bound(s.a).max(self.bound(s.b)),
            Node::Lvl(l) => {
                let child = l.children.iter().map(|c| self.bound(*c)).max().expect("nonempty");
                (l.f() as Tick + 1) * 3 * child
            }
            Node::Lvs(l) => 2 * l.lag,
        }
    }

    /// Submits a transaction to a node; gates forward it to their children.
    /// Duplicate submissions to a chain are ignored.
    pub fn submit(&self, id: NodeId, tx: Tx, t: Tick) -> Result<(), WorldError> {
        self.check(id)?;
        self.submit_quiet(id, tx, t);
        Ok(())
    }

    pub(crate) fn submit_quiet(&self, id: NodeId, tx: Tx, t: Tick) {
        match &self.nodes[id] {
            Node::Leaf(c) => {
                let _ = c.borrow_mut().submit(tx, t);
            }
            Node::Serial(s) => self.submit_quiet(s.a, GateTx::forward(s.id, tx), t),
            Node::Lvl(l) => {
                let w = GateTx::forward(l.id, tx);
                for c in &l.children {
                    self.submit_quiet(*c, w.clone(), t);
                }
            }
            Node::Lvs(l) => {
                let w = GateTx::forward(l.id, tx);
                self.submit_quiet(l.a, w.clone(), t);
                self.submit_quiet(l.b, w, t);
            }
        }
    }

    /// The form `tx` takes on chain `leaf` when submitted to node `id`, or
    /// `None` if submissions to `id` never reach `leaf`.
    pub fn wrapped_for(&self, id: NodeId, leaf: NodeId, tx: Tx) -> Option<Tx> {
        if id == leaf {
            return Some(tx);
        }
        match self.nodes.get(id)? {
            Node::Leaf(_) => None,
            Node::Serial(s) => self.wrapped_for(s.a, leaf, GateTx::forward(s.id, tx)),
            Node::Lvl(l) => {
                let w = GateTx::forward(l.id, tx);
                l.children.iter().find_map(|c| self.wrapped_for(*c, leaf, w.clone()))
            }
            Node::Lvs(l) => {
                let w = GateTx::forward(l.id, tx);
                self.wrapped_for(l.a, leaf, w.clone()).or_else(|| self.wrapped_for(l.b, leaf, w))
            }
        }
    }

    /// Like [`World::submit`], but only the chains in `leaves` receive it.
    pub fn submit_to_leaves(&self, id: NodeId, tx: Tx, t: Tick, leaves: &BTreeSet<NodeId>) -> Result<(), WorldError> {
        self.check(id)?;
        for leaf in leaves {
            self.check(*leaf)?;
            if let (Some(w), Some(mut chain)) = (self.wrapped_for(id, *leaf, tx.clone()), self.leaf_mut(*leaf)) {
                let _ = chain.submit(w, t);
            }
        }
        Ok(())
    }

    /// Produces the blocks due at `t` and lets every gate write.
    pub fn step(&self, t: Tick) {
        for node in &self.nodes {
            if let Node::Leaf(c) = node {
                c.borrow_mut().produce(t, &mut self.registry.borrow_mut());
            }
        }
        for node in &self.nodes {
            match node {
                Node::Serial(s) => s.write(self, t),
                Node::Lvl(l) => l.write(self, t),
                Node::Leaf(_) | Node::Lvs(_) => {}
            }
        }
    }

    /// What `observer` reads from node `id` at `t`.
    pub fn view(&self, id: NodeId, observer: ParticipantId, t: Tick) -> View {
        match &self.nodes[id] {
            Node::Leaf(c) => c.borrow().view(observer, t),
            Node::Serial(s) => s.read(self, observer, t),
            Node::Lvl(l) => l.read(self, observer, t),
            Node::Lvs(l) => l.read(self, observer, t),
        }
    }

    /// Wraps a gate output into a certified view.
    pub(crate) fn certify(&self, issuer: Issuer, ledger: Ledger) -> View {
        let mut view = View::from_born(mix_all(&[issuer.0 as u64, 0x9c]), ledger, 0, None);
        let cert = self.registry.borrow_mut().issue(issuer, &view.ledger, view.head);
        view.cert = Some(cert);
        view
    }
}

#[derive(Default)]
struct SerialFold {
    origin: u64,
    len: usize,
    digest: Digest,
    folded: Ledger,
}

#[derive(Default)]
struct SerialState {
    submitted: [Option<(u64, usize, Digest)>; 2],
    folds: HashMap<ParticipantId, SerialFold>,
    outputs: HashMap<ParticipantId, (Tick, View)>,
    prev: HashMap<ParticipantId, Ledger>,
}

pub struct SerialGate {
    id: GateId,
    issuer: Issuer,
    a: NodeId,
    b: NodeId,
    a_issuer: Issuer,
    checked: bool,
    writers: [ParticipantId; 2],
    state: RefCell<SerialState>,
}

impl SerialGate {
    pub fn children(&self) -> (NodeId, NodeId) {
        (self.a, self.b)
    }

    /// The proposer of the current tick checkpoints its view of `a` into `b`.
    fn write(&self, world: &World, t: Tick) {
        let p = (t % 2) as usize;
        let snap = world.view(self.a, self.writers[p], t);
        if self.checked && snap.cert.is_none() {
            return;
        }
        let mark = (snap.origin, snap.len(), snap.ledger.digest());
        if snap.is_empty() || self.state.borrow().submitted[p] == Some(mark) {
            return;
        }
        self.state.borrow_mut().submitted[p] = Some(mark);
        let key = [0x5a, p as u64, mark.0, mark.1 as u64, mark.2 .0];
        world.submit_quiet(self.b, GateTx::wrap(self.id, &key, GateMsg::Snapshot(snap), t), t);
    }

    fn accept(&self, world: &World, snap: &View) -> bool {
        if !self.checked {
            return true;
        }
        snap.cert.as_ref().is_some_and(|c| c.issuer == self.a_issuer && world.registry().verify(c, &snap.ledger, snap.head))
    }

    fn read(&self, world: &World, observer: ParticipantId, t: Tick) -> View {
        if let Some((at, v)) = self.state.borrow().outputs.get(&observer) {
            if *at == t {
                return v.clone();
            }
        }
        let vb = world.view(self.b, observer, t);
        let mut st = self.state.borrow_mut();
        let fold = st.folds.entry(observer).or_default();
        let resumable = fold.origin == vb.origin && fold.len <= vb.len() && vb.ledger.prefix_digest(fold.len) == fold.digest;
        if !resumable {
            *fold = SerialFold { origin: vb.origin, ..SerialFold::default() };
        }
        let mut folded = fold.folded.clone();
        for (_, msg) in addressed(&vb.ledger, self.id).filter(|(i, _)| *i >= fold.len) {
            if let GateMsg::Snapshot(snap) = msg {
                if self.accept(world, snap) {
                    folded = clean(&folded, &Ledger::from_vec_unchecked(forwarded(&snap.ledger, self.id)));
                }
            }
        }
        *fold = SerialFold { origin: vb.origin, len: vb.len(), digest: vb.ledger.digest(), folded: folded.clone() };
        let prev = st.prev.get(&observer).cloned().unwrap_or_default();
        let out = merge_monotone(&prev, &folded);
        st.prev.insert(observer, out.clone());
        drop(st);
        let view = world.certify(self.issuer, out);
        self.state.borrow_mut().outputs.insert(observer, (t, view.clone()));
        view
    }
}

#[derive(Default)]
struct LvsObserver {
    online_since: Tick,
    samples: VecDeque<(Tick, Ledger, Ledger)>,
    output: Option<(Tick, View)>,
}

#[derive(Default)]
struct LvsState {
    observers: HashMap<ParticipantId, LvsObserver>,
}

pub struct LvsGate {
    id: GateId,
    issuer: Issuer,
    a: NodeId,
    b: NodeId,
    lag: Tick,
    state: RefCell<LvsState>,
}

/// The interleaving rule of the lvs gate on the four ledgers a client holds.
pub fn lvs_output(a_lag: &Ledger, a_now: &Ledger, b_lag: &Ledger, b_now: &Ledger) -> Ledger {
    let ell = a_lag.len().min(b_lag.len());
    let a_ids = a_now.id_set();
    let b_ids = b_now.id_set();
    let holds = a_lag.iter().all(|t| b_ids.contains(&t.id)) && b_lag.iter().all(|t| a_ids.contains(&t.id));
    let base = interleave(&a_now.prefix(ell), &b_now.prefix(ell)).expect("both prefixes have length ell");
    if holds {
        return base;
    }
    let longer = if a_lag.len() >= b_lag.len() { a_now } else { b_now };
    base.extended(longer.suffix(ell).iter().cloned())
}

impl LvsGate {
    pub fn lag(&self) -> Tick {
        self.lag
    }

    fn read(&self, world: &World, observer: ParticipantId, t: Tick) -> View {
        if let Some(Some((at, v))) = self.state.borrow().observers.get(&observer).map(|o| o.output.clone()) {
            if at == t {
                return v;
            }
        }
        let a = Ledger::from_vec_unchecked(forwarded(&world.view(self.a, observer, t).ledger, self.id));
        let b = Ledger::from_vec_unchecked(forwarded(&world.view(self.b, observer, t).ledger, self.id));
        let mut st = self.state.borrow_mut();
        let obs = st.observers.entry(observer).or_insert_with(|| LvsObserver { online_since: t, ..LvsObserver::default() });
        if obs.samples.back().is_none_or(|s| s.0 < t) {
            obs.samples.push_back((t, a.clone(), b.clone()));
        }
        let out = if t < obs.online_since + self.lag {
            Ledger::empty()
        } else {
            let target = t - self.lag;
            while obs.samples.len() > 1 && obs.samples[1].0 <= target {
                obs.samples.pop_front();
            }
            let (_, a_lag, b_lag) = &obs.samples[0];
            lvs_output(a_lag, &a, b_lag, &b)
        };
        drop(st);
        let view = world.certify(self.issuer, out);
        if let Some(o) = self.state.borrow_mut().observers.get_mut(&observer) {
            o.output = Some((t, view.clone()));
        }
        view
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{consistent, sanitize, TxId};

    fn world(gst: Tick) -> World {
        World::new(NetworkModel::partial_synchrony(1, gst).unwrap())
    }

    fn leaf(w: &mut World, name: &str, safe: bool, live: bool, seed: u64) -> NodeId {
        w.add_leaf(ChainConfig::new(name, 2, 4, safe, live), ChainAdversary::benign(seed)).unwrap()
    }

    fn client(i: u64) -> ParticipantId {
        ParticipantId(i)
    }

    #[test]
    fn lvs_rule_examples() {
        let x = Ledger::of_ids(&[1, 2, 3]);
        let lag = x.prefix(2);
        assert_eq!(lvs_output(&lag, &x, &lag, &x).ids(), vec![TxId(1), TxId(1), TxId(2), TxId(2)]);
        assert_eq!(sanitize(&lvs_output(&lag, &x, &lag, &x)), Ledger::of_ids(&[1, 2]));
        // B stalled and empty: nothing interleaves, A's lagged length wins
        let empty = Ledger::empty();
        assert_eq!(lvs_output(&lag, &x, &empty, &empty), x);
        assert!(lvs_output(&empty, &empty, &empty, &empty).is_empty());
    }

    #[test]
    fn serial_rejects_uncertified_child() {
        let mut w = world(0);
        let a = w.add_leaf(ChainConfig { certifying: false, ..ChainConfig::new("a", 2, 4, true, true) }, ChainAdversary::benign(0)).unwrap();
        let b = leaf(&mut w, "b", true, true, 1);
        assert_eq!(w.add_serial(a, b), Err(WorldError::Uncertified { gate: "serial", child: a }));
        assert!(w.add_serial_without_certificates(a, b).is_ok());
    }

    #[test]
    fn serial_of_live_chains_outputs_within_two_tconf() {
        for seed in 0..10 {
            let mut w = world(0);
            let a = leaf(&mut w, "a", true, true, seed);
            let b = leaf(&mut w, "b", true, true, seed + 100);
            let s = w.add_serial(a, b).unwrap();
            for t in 0..=20 {
                if t == 3 {
                    w.submit(s, Tx::with_born(1, 3), t).unwrap();
                }
                w.step(t);
                let out = w.view(s, client(1), t);
                if t >= 3 + w.bound(s) {
                    assert!(out.ledger.contains(TxId(1)), "seed {seed} t {t}");
                }
                assert!(out.ledger.iter().all(|x| !x.id.is_derived()));
            }
        }
    }

    #[test]
    fn lvl_commits_with_all_chains_live() {
        let mut w = world(0);
        let c: Vec<NodeId> = (0..3).map(|i| leaf(&mut w, &format!("c{i}"), true, true, i)).collect();
        let g = w.add_lvl(&c).unwrap();
        assert_eq!(w.bound(g), 24);
        for t in 0..=60 {
            if t == 1 {
                w.submit(g, Tx::with_born(1, 1), t).unwrap();
            }
            w.step(t);
            let out = w.view(g, client(1), t);
            assert!(out.ledger.len() <= 1);
        }
        assert!(w.view(g, client(1), 60).ledger.contains(TxId(1)));
        assert!(w.view(g, client(2), 60).ledger.contains(TxId(1)));
    }

    #[test]
    fn lvl_survives_one_stalled_chain() {
        let mut w = world(0);
        let mut c: Vec<NodeId> = (0..2).map(|i| leaf(&mut w, &format!("c{i}"), true, true, i)).collect();
        let dead = leaf(&mut w, "c2", true, false, 7);
        w.leaf_mut(dead).unwrap().set_stall(None, 0, None).unwrap();
        c.push(dead);
        let g = w.add_lvl(&c).unwrap();
        for t in 0..=80 {
            if t == 1 {
                w.submit(g, Tx::with_born(1, 1), t).unwrap();
            }
            w.step(t);
        }
        assert!(w.view(g, client(1), 80).ledger.contains(TxId(1)));
    }

    #[test]
    fn lvs_outputs_from_either_live_child() {
        let mut w = World::new(NetworkModel::synchrony(1).unwrap());
        let a = leaf(&mut w, "a", true, true, 1);
        let b = leaf(&mut w, "b", true, false, 2);
        w.leaf_mut(b).unwrap().set_stall(None, 0, None).unwrap();
        let p = w.add_lvs(a, b).unwrap();
        assert!(w.warnings().is_empty());
        let mut last = Ledger::empty();
        for t in 0..=30 {
            if t == 2 {
                w.submit(p, Tx::with_born(1, 2), t).unwrap();
            }
            w.step(t);
            last = w.view(p, client(1), t).ledger;
        }
        assert!(last.contains(TxId(1)));
    }

    #[test]
    fn nested_gates_output_only_user_transactions() {
        let mut w = world(0);
        let c: Vec<NodeId> = (0..4).map(|i| leaf(&mut w, &format!("c{i}"), true, true, i)).collect();
        let l1 = w.add_lvl(&[c[0], c[1], c[2]]).unwrap();
        let l2 = w.add_lvl(&[c[0], c[1], c[3]]).unwrap();
        let s = w.add_serial(l1, l2).unwrap();
        let mut outs = Vec::new();
        for t in 0..=120 {
            if t == 1 {
                w.submit(s, Tx::with_born(1, 1), t).unwrap();
            }
            w.step(t);
            outs.push(w.view(s, client(1), t).ledger);
        }
        let last = outs.last().unwrap();
        assert_eq!(last.ids(), vec![TxId(1)]);
        for o in &outs {
            assert!(consistent(o, last));
        }
    }
}
