//! Simulated underlay chains with injectable safety and liveness faults.
//!
//! A chain produces one block per epoch on every branch. A safe chain has
//! exactly one branch; an unsafe chain may fork into several, each of them
//! individually valid and certified. Observers are pinned to one branch and
//! see a prefix of it that grows as blocks are delivered to them.
//!
//! When the chain is live, a transaction submitted at `t` is included by
//! the first block after `max(gst, t)` and every block is visible to every
//! observer within `tconf - T` of `max(gst, ts)`, so the transaction is in
//! every view by `max(gst, t) + tconf`. A chain that is not live may also
//! censor transactions, hold blocks back and freeze observers.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};

use rustc_hash::{FxHashMap as HashMap, FxHashSet as HashSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cert::{CertRegistry, Certificate, Issuer};
use crate::digest::{mix_all, pick, Digest};
use crate::ledger::{Ledger, Tick, Tx, TxId};
use crate::simnet::{DelayPolicy, ParticipantId};
use crate::view::View;

pub type ObserverId = ParticipantId;

/// Decides whether a submitted transaction may enter a branch:
/// `(branch, tx, submitted) -> keep`.
pub type BranchFilter = Arc<dyn Fn(usize, &Tx, Tick) -> bool + Send + Sync>;

fn default_true() -> bool {
    true
}

fn default_branch_cap() -> usize {
    4
}

/// Scenario-level description of one underlay chain.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub id: String,
    /// Epoch duration in ticks.
    #[serde(rename = "T")]
    pub epoch: Tick,
    pub tconf: Tick,
    pub safe: bool,
    pub live: bool,
    #[serde(default = "default_true")]
    pub certifying: bool,
    #[serde(default = "default_branch_cap")]
    pub max_branches: usize,
}

impl ChainConfig {
    pub fn new(id: impl Into<String>, epoch: Tick, tconf: Tick, safe: bool, live: bool) -> ChainConfig {
        ChainConfig { id: id.into(), epoch, tconf, safe, live, certifying: true, max_branches: 4 }
    }

    pub fn validate(&self) -> Result<(), ChainError> {
        if self.epoch == 0 {
            return Err(ChainError::Config(format!("chain {}: epoch duration must be positive", self.id)));
        }
        if self.tconf < self.epoch {
            return Err(ChainError::Config(format!(
                "chain {}: tconf {} is shorter than one epoch {}",
                self.id, self.tconf, self.epoch
            )));
        }
        if self.max_branches == 0 {
            return Err(ChainError::Config(format!("chain {}: branch cap must be positive", self.id)));
        }
        Ok(())
    }

    /// Largest delay between a block's creation and its delivery to an
    /// observer once the network is stable.
    pub fn delivery_bound(&self) -> Tick {
        self.tconf - self.epoch
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChainError {
    #[error("transaction {0} was already submitted")]
    Duplicate(TxId),
    #[error("cannot fork safe chain {0}")]
    ForkOnSafeChain(String),
    #[error("chain {0} already has the maximum of {1} branches")]
    BranchCap(String, usize),
    #[error("unknown branch {0}")]
    UnknownBranch(usize),
    #[error("fork height {at} is above the parent's height {height}")]
    ForkAboveTip { at: u64, height: u64 },
    #[error("stalling live chain {chain} until {until} would miss deadlines after gst {gst}")]
    StallBreaksLiveness { chain: String, until: Tick, gst: Tick },
    #[error("cannot filter branches of safe chain {0}")]
    FilterOnSafeChain(String),
    #[error("invalid chain config: {0}")]
    Config(String),
}

/// Randomized misbehavior of a chain. Knobs that would contradict the
/// chain's fault flags are ignored.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainAdversary {
    pub seed: u64,
    pub policy: DelayPolicy,
    /// Out of 1000: chance that a transaction is never included.
    #[serde(default)]
    pub censor_permille: u32,
    /// Extra delay beyond the live bounds, for inclusion and delivery.
    #[serde(default)]
    pub extra_delay: Tick,
    /// Out of 1000: chance that a branch adds a transaction of its own to a block.
    #[serde(default)]
    pub phantom_permille: u32,
}

impl ChainAdversary {
    pub fn benign(seed: u64) -> ChainAdversary {
        ChainAdversary { seed, policy: DelayPolicy::Biased, censor_permille: 0, extra_delay: 0, phantom_permille: 0 }
    }
}

/// Block metadata. Transactions live in the branch's flat arrays.
#[derive(Clone, Debug)]
pub struct Block {
    pub height: u64,
    pub ts: Tick,
    pub parent: Digest,
    pub digest: Digest,
    /// End offset of this block's transactions in the branch.
    pub end: usize,
    pub cert: Option<Certificate>,
}

#[derive(Clone, Debug)]
struct Branch {
    fork: Option<(usize, u64)>,
    blocks: Vec<Block>,
    txs: Arc<Vec<Tx>>,
    digests: Arc<Vec<Digest>>,
    stamps: Arc<Vec<Tick>>,
    included: HashSet<TxId>,
    queue: BTreeMap<(Tick, u64), usize>,
    injected: BTreeMap<Tick, Vec<Tx>>,
}

impl Branch {
    fn genesis() -> Branch {
        Branch {
            fork: None,
            blocks: vec![Block { height: 0, ts: 0, parent: Digest::ZERO, digest: Digest::ZERO, end: 0, cert: None }],
            txs: Arc::new(Vec::new()),
            digests: Arc::new(Vec::new()),
            stamps: Arc::new(Vec::new()),
            included: HashSet::default(),
            queue: BTreeMap::new(),
            injected: BTreeMap::new(),
        }
    }

    fn height(&self) -> u64 {
        self.blocks.len() as u64 - 1
    }

    fn ledger_upto(&self, height: u64) -> Ledger {
        let end = self.blocks[height as usize].end;
        Ledger::from_parts(self.txs.clone(), self.digests.clone(), end)
    }

    fn push_block(&mut self, ts: Tick, txs: Vec<Tx>) -> &mut Block {
        let parent = self.blocks.last().expect("genesis").digest;
        let (all, digests, stamps) =
            (Arc::make_mut(&mut self.txs), Arc::make_mut(&mut self.digests), Arc::make_mut(&mut self.stamps));
        let mut acc = digests.last().copied().unwrap_or(Digest::ZERO);
        for tx in txs {
            self.included.insert(tx.id);
            acc = acc.chain(tx.id.0);
            digests.push(acc);
            stamps.push(ts);
            all.push(tx);
        }
        let height = self.blocks.len() as u64;
        let digest = parent.chain(height).chain(ts).chain(acc.0);
        self.blocks.push(Block { height, ts, parent, digest, end: all.len(), cert: None });
        self.blocks.last_mut().expect("just pushed")
    }
}

#[derive(Clone, Debug)]
struct Pending {
    tx: Tx,
    submitted: Tick,
}

#[derive(Clone, Debug)]
struct Stall {
    observers: Option<BTreeSet<ObserverId>>,
    from: Tick,
    until: Option<Tick>,
}

pub struct UnderlayChain {
    cfg: ChainConfig,
    issuer: Issuer,
    participant: ParticipantId,
    gst: Tick,
    adversary: ChainAdversary,
    branches: Vec<Branch>,
    mempool: Vec<Pending>,
    seen: HashSet<TxId>,
    assignment: RefCell<HashMap<ObserverId, usize>>,
    /// Last answer of `visible_height` per (branch, observer).
    visible: RefCell<HashMap<(usize, ObserverId), (Tick, u64)>>,
    stalls: Vec<Stall>,
    filter: Option<BranchFilter>,
    produced_until: Option<Tick>,
}

impl UnderlayChain {
    pub fn new(cfg: ChainConfig, issuer: Issuer, gst: Tick, adversary: ChainAdversary) -> Result<UnderlayChain, ChainError> {
        cfg.validate()?;
        let participant = ParticipantId(mix_all(&[0xc4a1, issuer.0 as u64]));
        Ok(UnderlayChain {
            cfg,
            issuer,
            participant,
            gst,
            adversary,
            branches: vec![Branch::genesis()],
            mempool: Vec::new(),
            seen: HashSet::default(),
            assignment: RefCell::new(HashMap::default()),
            visible: RefCell::new(HashMap::default()),
            stalls: Vec::new(),
            filter: None,
            produced_until: None,
        })
    }

    pub fn config(&self) -> &ChainConfig {
        &self.cfg
    }

    pub fn issuer(&self) -> Issuer {
        self.issuer
    }

    pub fn branch_count(&self) -> usize {
        self.branches.len()
    }

    pub fn height(&self, branch: usize) -> Option<u64> {
        self.branches.get(branch).map(Branch::height)
    }

    pub fn blocks(&self, branch: usize) -> &[Block] {
        &self.branches[branch].blocks
    }

    /// Inclusion tick of `tx` on `branch`, or `None` if censored.
    fn inclusion_time(&self, branch: usize, submitted: Tick, seq: u64) -> Option<Tick> {
        let t_ep = self.cfg.epoch;
        let next = (submitted / t_ep + 1) * t_ep;
        let mut latest = ((submitted.max(self.gst) + t_ep) / t_ep) * t_ep;
        let r = mix_all(&[self.adversary.seed, self.issuer.0 as u64, branch as u64, seq, 0x1c1]);
        if !self.cfg.live {
            if pick(r, 1000) < self.adversary.censor_permille as u64 {
                return None;
            }
            latest += self.adversary.extra_delay / t_ep * t_ep;
        }
        let slots = (latest - next) / t_ep + 1;
        let slot = match self.adversary.policy {
            DelayPolicy::Max => slots - 1,
            DelayPolicy::Min => 0,
            DelayPolicy::Fixed(d) => (d / t_ep).min(slots - 1),
            DelayPolicy::Biased => match pick(r.rotate_left(13), 4) {
                0 => slots - 1,
                1 => 0,
                _ => pick(r.rotate_left(31), slots),
            },
        };
        Some(next + slot * t_ep)
    }

    /// Tick at which block `height` of `branch` reaches `observer`, ignoring
    /// freezes. `None` means never.
    fn delivery_time(&self, branch: usize, block: &Block, observer: ObserverId) -> Option<Tick> {
        let bound = self.cfg.delivery_bound();
        let deadline = block.ts.max(self.gst) + bound;
        let r = mix_all(&[self.adversary.seed, self.participant.0, observer.0, branch as u64, block.height]);
        let mut at = match self.adversary.policy {
            DelayPolicy::Max => deadline,
            DelayPolicy::Min => block.ts,
            DelayPolicy::Fixed(d) => (block.ts + d).min(deadline),
            DelayPolicy::Biased => match pick(r, 8) {
                0..=2 => deadline,
                3 => block.ts,
                _ => block.ts + pick(r.rotate_left(7), deadline - block.ts + 1),
            },
        };
        if !self.cfg.live && self.adversary.extra_delay > 0 {
            at += pick(r.rotate_left(41), self.adversary.extra_delay + 1);
        }
        Some(at)
    }

    pub fn submit(&mut self, tx: Tx, t: Tick) -> Result<(), ChainError> {
        if !self.seen.insert(tx.id) {
            return Err(ChainError::Duplicate(tx.id));
        }
        let seq = self.mempool.len() as u64;
        let idx = self.mempool.len();
        self.mempool.push(Pending { tx, submitted: t });
        for b in 0..self.branches.len() {
            if let Some(at) = self.inclusion_time(b, t, seq) {
                self.branches[b].queue.insert((at, seq), idx);
            }
        }
        Ok(())
    }

    /// Places a transaction directly into one branch at the block produced at `at`.
    pub fn inject(&mut self, branch: usize, at: Tick, tx: Tx) -> Result<(), ChainError> {
        let b = self.branches.get_mut(branch).ok_or(ChainError::UnknownBranch(branch))?;
        b.injected.entry(at).or_default().push(tx);
        Ok(())
    }

    /// Creates a branch sharing `parent`'s blocks up to `at_height` and
    /// diverging afterwards. Heights not produced yet are copied as the
    /// parent produces them.
    pub fn fork_branch(&mut self, parent: usize, at_height: u64) -> Result<usize, ChainError> {
        if self.cfg.safe {
            return Err(ChainError::ForkOnSafeChain(self.cfg.id.clone()));
        }
        if self.branches.len() >= self.cfg.max_branches {
            return Err(ChainError::BranchCap(self.cfg.id.clone(), self.cfg.max_branches));
        }
        let p = self.branches.get(parent).ok_or(ChainError::UnknownBranch(parent))?;
        let produced = self.produced_until.is_some();
        if produced && at_height > p.height() {
            return Err(ChainError::ForkAboveTip { at: at_height, height: p.height() });
        }
        let mut b = Branch::genesis();
        b.fork = Some((parent, at_height));
        let keep = at_height.min(p.height());
        for h in 1..=keep {
            let blk = &p.blocks[h as usize];
            let start = p.blocks[h as usize - 1].end;
            let txs = p.txs[start..blk.end].to_vec();
            let cert = blk.cert;
            let nb = b.push_block(blk.ts, txs);
            nb.cert = cert;
        }
        let id = self.branches.len();
        for (seq, pend) in self.mempool.iter().enumerate() {
            if b.included.contains(&pend.tx.id) {
                continue;
            }
            if let Some(at) = self.inclusion_time(id, pend.submitted, seq as u64) {
                b.queue.insert((at, seq as u64), seq);
            }
        }
        self.branches.push(b);
        Ok(id)
    }

    /// Pins an observer to a branch.
    pub fn assign(&self, observer: ObserverId, branch: usize) -> Result<(), ChainError> {
        if branch >= self.branches.len() {
            return Err(ChainError::UnknownBranch(branch));
        }
        self.assignment.borrow_mut().insert(observer, branch);
        Ok(())
    }

    pub fn branch_of(&self, observer: ObserverId) -> usize {
        if self.branches.len() == 1 {
            return 0;
        }
        *self.assignment.borrow_mut().entry(observer).or_insert_with(|| {
            let r = mix_all(&[self.adversary.seed, self.participant.0, observer.0, 0xb7]);
            pick(r, self.branches.len() as u64) as usize
        })
    }

    /// Freezes the views of `observers` (all observers if `None`) during
    /// `[from, until)`; `until = None` freezes forever.
    pub fn set_stall(&mut self, observers: Option<BTreeSet<ObserverId>>, from: Tick, until: Option<Tick>) -> Result<(), ChainError> {
        if self.cfg.live {
            let ok = matches!(until, Some(u) if u <= self.gst);
            if !ok {
                return Err(ChainError::StallBreaksLiveness {
                    chain: self.cfg.id.clone(),
                    until: until.unwrap_or(Tick::MAX),
                    gst: self.gst,
                });
            }
        }
        self.stalls.push(Stall { observers, from, until });
        Ok(())
    }

    /// Lets the adversary of an unsafe chain decide which submitted
    /// transactions each branch includes. Rejected ones never enter that
    /// branch; injected ones bypass the filter.
    pub fn set_branch_filter(&mut self, filter: BranchFilter) -> Result<(), ChainError> {
        if self.cfg.safe {
            return Err(ChainError::FilterOnSafeChain(self.cfg.id.clone()));
        }
        self.filter = Some(filter);
        Ok(())
    }

    /// Produces the blocks due at tick `t` on every branch.
    pub fn produce(&mut self, t: Tick, registry: &mut CertRegistry) {
        if self.produced_until.is_some_and(|p| p >= t) {
            return;
        }
        self.produced_until = Some(t);
        if t == 0 || !t.is_multiple_of(self.cfg.epoch) {
            return;
        }
        for b in 0..self.branches.len() {
            let height = self.branches[b].height() + 1;
            let copy_from = match self.branches[b].fork {
                Some((parent, at)) if height <= at => Some(parent),
                _ => None,
            };
            let txs = match copy_from {
                Some(parent) => {
                    let p = &self.branches[parent];
                    let blk = &p.blocks[height as usize];
                    let start = p.blocks[height as usize - 1].end;
                    p.txs[start..blk.end].to_vec()
                }
                None => self.collect_block(b, t, height),
            };
            let branch = &mut self.branches[b];
            branch.push_block(t, txs);
            if self.cfg.certifying {
                let ledger = branch.ledger_upto(height);
                let cert = registry.issue(self.issuer, &ledger, t);
                branch.blocks.last_mut().expect("block").cert = Some(cert);
            }
        }
    }

    fn collect_block(&mut self, b: usize, t: Tick, height: u64) -> Vec<Tx> {
        let mut txs = Vec::new();
        let branch = &mut self.branches[b];
        let due: Vec<(Tick, u64)> = branch.queue.range(..=(t, u64::MAX)).map(|(k, _)| *k).collect();
        let mut taken = HashSet::default();
        for key in due {
            let idx = branch.queue.remove(&key).expect("due key");
            let Pending { tx, submitted } = &self.mempool[idx];
            if self.filter.as_ref().is_some_and(|f| !f(b, tx, *submitted)) {
                continue;
            }
            if !branch.included.contains(&tx.id) && taken.insert(tx.id) {
                txs.push(tx.clone());
            }
        }
        if let Some(extra) = branch.injected.remove(&t) {
            for tx in extra {
                if !branch.included.contains(&tx.id) && taken.insert(tx.id) {
                    txs.push(tx);
                }
            }
        }
        if !self.cfg.safe && b > 0 {
            let r = mix_all(&[self.adversary.seed, self.issuer.0 as u64, b as u64, height, 0x9a]);
            if pick(r, 1000) < self.adversary.phantom_permille as u64 {
                let id = TxId::derive(&[0x9a, self.issuer.0 as u64, b as u64, height]);
                txs.insert(0, Tx { id, born: t, payload: crate::ledger::Payload::Data(Arc::from(vec![b as u8])) });
            }
        }
        txs
    }

    fn frozen_time(&self, observer: ObserverId, t: Tick) -> Tick {
        let mut eff = t;
        for s in &self.stalls {
            let covers = s.observers.as_ref().is_none_or(|o| o.contains(&observer));
            if covers && s.from <= t && s.until.is_none_or(|u| t < u) {
                eff = eff.min(s.from);
            }
        }
        eff
    }

    /// Highest height of `branch` fully delivered to `observer` by `t`.
    fn visible_height(&self, branch: usize, observer: ObserverId, t: Tick) -> u64 {
        let br = &self.branches[branch];
        // blocks only get appended, so an earlier answer is a lower bound
        let mut h = match self.visible.borrow().get(&(branch, observer)) {
            Some(&(at, h)) if at <= t => h,
            _ => 0,
        };
        for blk in br.blocks.iter().skip(h as usize + 1) {
            if blk.ts > t {
                break;
            }
            match self.delivery_time(branch, blk, observer) {
                Some(at) if at <= t => h = blk.height,
                _ => break,
            }
        }
        self.visible.borrow_mut().insert((branch, observer), (t, h));
        h
    }

    pub fn view(&self, observer: ObserverId, t: Tick) -> View {
        let b = self.branch_of(observer);
        let eff = self.frozen_time(observer, t);
        let h = self.visible_height(b, observer, eff);
        self.view_of_branch(b, h)
    }

    /// The certified view of `branch` up to `height`.
    pub fn view_of_branch(&self, branch: usize, height: u64) -> View {
        let br = &self.branches[branch];
        let h = height.min(br.height());
        let blk = &br.blocks[h as usize];
        View::new(mix_all(&[self.issuer.0 as u64, branch as u64, 0x0e]), br.ledger_upto(h), br.stamps.clone(), blk.ts, blk.cert)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{consistent, is_prefix};

    fn chain(safe: bool, live: bool, gst: Tick, seed: u64) -> UnderlayChain {
        UnderlayChain::new(ChainConfig::new("a", 1, 4, safe, live), Issuer(0), gst, ChainAdversary::benign(seed)).unwrap()
    }

    fn obs(i: u64) -> ObserverId {
        ParticipantId(i)
    }

    fn run(c: &mut UnderlayChain, reg: &mut CertRegistry, upto: Tick) {
        for t in 0..=upto {
            c.produce(t, reg);
        }
    }

    #[test]
    fn live_chain_meets_deadline() {
        for seed in 0..30 {
            let mut reg = CertRegistry::new();
            let mut c = chain(true, true, 0, seed);
            c.submit(Tx::new(1), 0).unwrap();
            for t in 0..=4 {
                c.produce(t, &mut reg);
            }
            for o in 0..5 {
                assert!(c.view(obs(o), 4).ledger.contains(TxId(1)), "seed {seed}");
            }
        }
    }

    #[test]
    fn live_chain_deadline_waits_for_gst() {
        for seed in 0..30 {
            let mut reg = CertRegistry::new();
            let mut c = chain(true, true, 10, seed);
            c.submit(Tx::new(1), 0).unwrap();
            run(&mut c, &mut reg, 14);
            for o in 0..5 {
                assert!(c.view(obs(o), 14).ledger.contains(TxId(1)));
            }
        }
    }

    #[test]
    fn duplicate_submission_rejected() {
        let mut c = chain(true, true, 0, 1);
        c.submit(Tx::new(1), 0).unwrap();
        assert_eq!(c.submit(Tx::new(1), 1), Err(ChainError::Duplicate(TxId(1))));
    }

    #[test]
    fn safe_chain_views_are_consistent_and_monotone() {
        let mut reg = CertRegistry::new();
        let mut c = chain(true, true, 5, 9);
        let mut seen: Vec<Vec<Ledger>> = vec![Vec::new(); 3];
        for t in 0..30 {
            c.submit(Tx::new(t + 1), t).unwrap();
            c.produce(t, &mut reg);
            for (o, hist) in seen.iter_mut().enumerate() {
                let v = c.view(obs(o as u64), t);
                if let Some(prev) = hist.last() {
                    assert!(is_prefix(prev, &v.ledger));
                }
                hist.push(v.ledger);
            }
        }
        let all: Vec<&Ledger> = seen.iter().flatten().collect();
        for a in &all {
            for b in &all {
                assert!(consistent(a, b));
            }
        }
    }

    #[test]
    fn views_are_certified() {
        let mut reg = CertRegistry::new();
        let mut c = chain(true, true, 0, 2);
        c.submit(Tx::new(1), 0).unwrap();
        run(&mut c, &mut reg, 6);
        let v = c.view(obs(0), 6);
        assert!(reg.verify(v.cert.as_ref().unwrap(), &v.ledger, v.head));
    }

    #[test]
    fn fork_on_safe_chain_is_rejected() {
        let mut c = chain(true, true, 0, 1);
        assert_eq!(c.fork_branch(0, 0), Err(ChainError::ForkOnSafeChain("a".into())));
    }

    #[test]
    fn forked_branches_conflict_and_are_both_certified() {
        let mut reg = CertRegistry::new();
        let mut c = chain(false, true, 0, 4);
        c.submit(Tx::new(1), 0).unwrap();
        run(&mut c, &mut reg, 4);
        let h = c.height(0).unwrap();
        let b1 = c.fork_branch(0, h).unwrap();
        let b2 = c.fork_branch(b1, h).unwrap();
        c.inject(0, 6, Tx::new(2)).unwrap();
        c.inject(b1, 6, Tx::new(3)).unwrap();
        c.inject(b2, 6, Tx::new(4)).unwrap();
        for t in 5..=10 {
            c.produce(t, &mut reg);
        }
        let views: Vec<View> = (0..3).map(|b| c.view_of_branch(b, 99)).collect();
        for i in 0..3 {
            assert!(reg.verify(views[i].cert.as_ref().unwrap(), &views[i].ledger, views[i].head));
            for j in 0..3 {
                if i != j {
                    assert!(!consistent(&views[i].ledger, &views[j].ledger));
                }
            }
        }
        c.assign(obs(1), 0).unwrap();
        c.assign(obs(2), b1).unwrap();
        assert!(!consistent(&c.view(obs(1), 20).ledger, &c.view(obs(2), 20).ledger));
    }

    #[test]
    fn branch_cap_enforced() {
        let mut c = chain(false, true, 0, 1);
        for _ in 0..3 {
            c.fork_branch(0, 0).unwrap();
        }
        assert_eq!(c.fork_branch(0, 0), Err(ChainError::BranchCap("a".into(), 4)));
    }

    #[test]
    fn stall_rules() {
        let mut c = chain(true, true, 10, 1);
        assert!(c.set_stall(None, 0, Some(10)).is_ok());
        assert!(matches!(c.set_stall(None, 0, Some(11)), Err(ChainError::StallBreaksLiveness { .. })));
        assert!(matches!(c.set_stall(None, 0, None), Err(ChainError::StallBreaksLiveness { .. })));
    }

    #[test]
    fn stalled_observer_stays_consistent_on_safe_chain() {
        let mut reg = CertRegistry::new();
        let mut c = chain(true, false, 0, 3);
        c.set_stall(Some([obs(1)].into()), 3, None).unwrap();
        for t in 0..20 {
            c.submit(Tx::new(t + 1), t).unwrap();
            c.produce(t, &mut reg);
        }
        let frozen = c.view(obs(1), 19).ledger;
        let moving = c.view(obs(2), 19).ledger;
        assert!(frozen.len() < moving.len());
        assert!(is_prefix(&frozen, &moving));
        assert_eq!(frozen, c.view(obs(1), 3).ledger);
    }

    #[test]
    fn live_stall_until_gst_keeps_deadlines() {
        let mut reg = CertRegistry::new();
        let mut c = chain(true, true, 8, 5);
        c.set_stall(None, 0, Some(8)).unwrap();
        c.submit(Tx::new(1), 2).unwrap();
        run(&mut c, &mut reg, 12);
        assert!(c.view(obs(0), 12).ledger.contains(TxId(1)));
        assert!(c.view(obs(0), 7).ledger.is_empty());
    }

    #[test]
    fn delayed_fork_copies_shared_prefix() {
        let mut reg = CertRegistry::new();
        let mut c = chain(false, true, 0, 8);
        let b = c.fork_branch(0, 3).unwrap();
        for t in 0..12 {
            c.submit(Tx::new(t + 1), t).unwrap();
            c.produce(t, &mut reg);
        }
        let main = c.view_of_branch(0, 3).ledger;
        let side = c.view_of_branch(b, 3).ledger;
        assert_eq!(main, side);
    }
}
