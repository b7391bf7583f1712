//! Turns a scenario into a running world.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use interchain_circuits::CircuitNode;
use interchain_core::digest::{mix_all, pick};
use interchain_core::gate::{GateId, GateMsg, GateTx};
use interchain_core::ledger::{Ledger, Tick, Tx};
use interchain_core::simnet::{DelayPolicy, Mode, ParticipantId};
use interchain_core::underlay::{BranchFilter, ChainAdversary, ChainConfig};
use interchain_core::view::View;
use interchain_core::world::{NodeId, World};

use crate::scenario::{
    client_id, AdversaryScript, FilterSpec, ForkSpec, InjectPayload, ObserverRef, PinSpec, PolicySpec, Scenario, ScenarioError,
    StallSpec,
};

/// Largest world a circuit may expand to.
pub const MAX_WORLD_NODES: usize = 4096;

pub struct Built {
    pub world: World,
    pub root: NodeId,
    /// World node of leaf `i + 1`.
    pub leaves: Vec<NodeId>,
    pub clients: Vec<ParticipantId>,
}

impl Built {
    pub fn observer(&self, o: ObserverRef) -> Result<ParticipantId, ScenarioError> {
        match o {
            ObserverRef::Client(c) => Ok(client_id(c)),
            ObserverRef::Writer { gate, index } => {
                if gate >= self.world.len() {
                    return Err(ScenarioError::World(format!("no node {gate}")));
                }
                self.world
                    .writers(gate)
                    .get(index)
                    .map(|w| w.participant)
                    .ok_or_else(|| ScenarioError::World(format!("node {gate} has no writer {index}")))
            }
        }
    }
}

fn world_err(e: impl std::fmt::Display) -> ScenarioError {
    ScenarioError::World(e.to_string())
}

/// Misbehavior drawn from the seed, pushed toward the edges of what each
/// chain's fault flags allow.
pub fn random_script(sc: &Scenario) -> AdversaryScript {
    let k = sc.faults.len();
    let gst = sc.network.gst;
    let tconf = sc.chains.tconf;
    let clients = sc.clients.max(1);
    let mut out = AdversaryScript::default();
    for (i, fault) in sc.faults.0.iter().enumerate() {
        let leaf = i + 1;
        let r = |tag: u64| mix_all(&[sc.seed, leaf as u64, tag]);
        let policy = match pick(r(1), 8) {
            0..=3 => DelayPolicy::Biased,
            4 | 5 => DelayPolicy::Max,
            6 => DelayPolicy::Min,
            _ => DelayPolicy::Fixed(pick(r(2), tconf + 1)),
        };
        let mut p = PolicySpec { leaf, policy, censor_permille: 0, extra_delay: 0, phantom_permille: 0 };
        if !fault.live {
            // a random proper subset of clients, never empty
            let split: Vec<ObserverRef> = {
                let mask = 1 + pick(r(4), (1u64 << clients.min(16)) - 1);
                let mut v: Vec<ObserverRef> = (0..clients).filter(|c| mask >> c & 1 == 1).map(ObserverRef::Client).collect();
                if v.len() == clients && clients > 1 {
                    v.pop();
                }
                v
            };
            match pick(r(3), 5) {
                0 => out.stalls.push(StallSpec { leaf, observers: None, from: 0, until: None }),
                1 => p.censor_permille = 1000,
                2 => {
                    p.censor_permille = 500;
                    p.extra_delay = 1 + pick(r(5), 4 * tconf);
                }
                3 => {
                    out.stalls.push(StallSpec { leaf, observers: Some(split), from: pick(r(6), gst + tconf + 1), until: None });
                    p.extra_delay = pick(r(5), 2 * tconf);
                }
                _ => out.stalls.push(StallSpec { leaf, observers: None, from: pick(r(6), gst + 2 * tconf + 1), until: None }),
            }
        } else if sc.network.mode == Mode::PartialSynchrony && gst > 0 && pick(r(7), 2) == 0 {
            let observers = if pick(r(8), 2) == 0 {
                None
            } else {
                Some((0..clients).filter(|c| (c + leaf) % 2 == 0).map(ObserverRef::Client).collect())
            };
            out.stalls.push(StallSpec { leaf, observers, from: pick(r(9), gst), until: Some(gst) });
        }
        if !fault.safe {
            let branches = 2 + pick(r(10), 3) as usize;
            for _ in 1..branches {
                out.forks.push(ForkSpec { leaf, parent: 0, at_height: pick(r(11), 3) });
            }
            p.phantom_permille = if pick(r(12), 2) == 0 { 1000 } else { 500 };
            let shift = pick(r(13), branches as u64) as usize;
            for c in 0..clients {
                out.pins.push(PinSpec { leaf, observer: ObserverRef::Client(c), branch: (c + shift) % branches });
            }
            // front-run the last scheduled transaction on every fork
            if let Some(last) = sc.txs.iter().filter(|t| t.to.is_none()).map(|t| t.id).max() {
                for b in 1..branches {
                    out.injections.push(crate::scenario::InjectSpec {
                        leaf,
                        branch: b,
                        at: sc.chains.epoch,
                        payload: InjectPayload::Forward { tx: last },
                    });
                }
            }
        }
        out.policies.push(p);
    }
    debug_assert_eq!(out.policies.len(), k);
    out
}

struct Builder {
    world: World,
    leaves: Vec<NodeId>,
    unchecked_serial: bool,
    memo: HashMap<*const CircuitNode, NodeId>,
}

impl Builder {
    fn gate(&mut self, node: &Arc<CircuitNode>, fresh: bool) -> Result<NodeId, ScenarioError> {
        if let CircuitNode::Leaf(i) = **node {
            return Ok(self.leaves[i - 1]);
        }
        let key = Arc::as_ptr(node);
        if !fresh {
            if let Some(id) = self.memo.get(&key) {
                return Ok(*id);
            }
        }
        if self.world.len() >= MAX_WORLD_NODES {
            return Err(ScenarioError::Unsupported(format!("circuit expands to more than {MAX_WORLD_NODES} world nodes")));
        }
        let mut ids: Vec<NodeId> = Vec::new();
        for c in node.children() {
            // a gate needs distinct children; repeated subtrees get their own copy
            let id = self.gate(c, fresh)?;
            let id = if ids.contains(&id) {
                if matches!(**c, CircuitNode::Leaf(_)) {
                    return Err(ScenarioError::Unsupported(format!("gate {node} repeats a chain among its children")));
                }
                self.gate(c, true)?
            } else {
                id
            };
            ids.push(id);
        }
        let id = match &**node {
            CircuitNode::Serial(_) if self.unchecked_serial => {
                let mut acc = ids[0];
                for c in &ids[1..] {
                    acc = self.world.add_serial_without_certificates(acc, *c).map_err(world_err)?;
                }
                acc
            }
            CircuitNode::Serial(_) => self.world.add_serial_chain(&ids).map_err(world_err)?,
            CircuitNode::Lvl3(_) => self.world.add_lvl(&ids).map_err(world_err)?,
            CircuitNode::Lvs(_) => self.world.add_lvs(ids[0], ids[1]).map_err(world_err)?,
            CircuitNode::Leaf(_) => unreachable!(),
        };
        if !fresh {
            self.memo.insert(key, id);
        }
        Ok(id)
    }
}

fn filter_of(spec: &FilterSpec) -> BranchFilter {
    let gate = GateId(spec.gate as u32);
    let until = spec.until;
    let forwards: BTreeMap<u64, usize> = spec.forwards.iter().map(|r| (r.key, r.branch)).collect();
    let relays: BTreeMap<u64, usize> = spec.relays.iter().map(|r| (r.key, r.branch)).collect();
    Arc::new(move |branch: usize, tx: &Tx, submitted: Tick| {
        if submitted >= until {
            return true;
        }
        match tx.gate() {
            Some(g) if g.gate == gate => match &g.msg {
                GateMsg::Forward(inner) => forwards.get(&inner.id.0).is_none_or(|b| *b == branch),
                GateMsg::Relay { from, .. } => relays.get(&(*from as u64)) == Some(&branch),
                _ => true,
            },
            _ => true,
        }
    })
}

/// Builds the world with chains, gates and every scripted and random
/// adversary action applied.
pub fn build(sc: &Scenario) -> Result<Built, ScenarioError> {
    let circuit = sc.validate()?;
    let net = sc.network.model()?;
    let random = if sc.adversary.random { random_script(sc) } else { AdversaryScript::default() };
    let scripts = [&random, &sc.adversary];

    let mut world = World::new(net);
    let uncertified: BTreeSet<usize> = sc.uncertified.iter().copied().collect();
    let mut leaves = Vec::new();
    for (i, fault) in sc.faults.0.iter().enumerate() {
        let leaf = i + 1;
        let mut cfg = ChainConfig::new(format!("chain{leaf}"), sc.chains.epoch, sc.chains.tconf, fault.safe, fault.live);
        cfg.certifying = !uncertified.contains(&leaf);
        let mut adv = ChainAdversary::benign(mix_all(&[sc.seed, leaf as u64, 0xad]));
        for p in scripts.iter().flat_map(|s| &s.policies).filter(|p| p.leaf == leaf) {
            adv.policy = p.policy;
            adv.censor_permille = p.censor_permille;
            adv.extra_delay = p.extra_delay;
            adv.phantom_permille = p.phantom_permille;
        }
        leaves.push(world.add_leaf(cfg, adv).map_err(world_err)?);
    }
    let mut b = Builder { world, leaves, unchecked_serial: sc.serial_without_certificates, memo: HashMap::new() };
    let root = b.gate(&circuit, false)?;
    let built = Built { world: b.world, root, leaves: b.leaves, clients: (0..sc.clients).map(client_id).collect() };

    for s in scripts {
        for f in &s.forks {
            let mut chain = built.world.leaf_mut(built.leaves[f.leaf - 1]).expect("leaf");
            chain.fork_branch(f.parent, f.at_height).map_err(world_err)?;
        }
    }
    for s in scripts {
        for st in &s.stalls {
            let observers = match &st.observers {
                None => None,
                Some(v) => Some(v.iter().map(|o| built.observer(*o)).collect::<Result<BTreeSet<_>, _>>()?),
            };
            let mut chain = built.world.leaf_mut(built.leaves[st.leaf - 1]).expect("leaf");
            chain.set_stall(observers, st.from, st.until).map_err(world_err)?;
        }
        for p in &s.pins {
            let who = built.observer(p.observer)?;
            let chain = built.world.leaf(built.leaves[p.leaf - 1]).expect("leaf");
            chain.assign(who, p.branch).map_err(world_err)?;
        }
        for inj in &s.injections {
            let node = built.leaves[inj.leaf - 1];
            let tx = match &inj.payload {
                InjectPayload::Forward { tx } => match built.world.wrapped_for(built.root, node, Tx::with_born(*tx, inj.at)) {
                    Some(w) => w,
                    None => continue,
                },
                InjectPayload::Snapshot { gate, txs } => {
                    let g = GateId(*gate as u32);
                    let ledger = Ledger::from_vec_unchecked(txs.iter().map(|id| GateTx::forward(g, Tx::with_born(*id, inj.at))).collect());
                    let digest = ledger.digest().0;
                    let view = View::from_born(mix_all(&[0xf0f, *gate as u64, inj.at, digest]), ledger, inj.at, None);
                    GateTx::wrap(g, &[0xf0f, inj.at, digest], GateMsg::Snapshot(view), inj.at)
                }
            };
            let mut chain = built.world.leaf_mut(node).expect("leaf");
            chain.inject(inj.branch, inj.at, tx).map_err(world_err)?;
        }
        for f in &s.filters {
            let mut chain = built.world.leaf_mut(built.leaves[f.leaf - 1]).expect("leaf");
            chain.set_branch_filter(filter_of(f)).map_err(world_err)?;
        }
    }
    Ok(built)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{ChainParams, NetworkSpec, TxSpec};
    use interchain_core::bits::FaultAssignment;

    fn scenario(circuit: &str, faults: FaultAssignment) -> Scenario {
        Scenario {
            name: String::new(),
            seed: 3,
            network: NetworkSpec { mode: Mode::PartialSynchrony, delta: 2, gst: 10 },
            chains: ChainParams::default(),
            circuit: circuit.into(),
            faults,
            uncertified: vec![],
            serial_without_certificates: false,
            adversary: AdversaryScript { random: true, ..AdversaryScript::default() },
            txs: vec![TxSpec { id: 1, at: 1, to: None }],
            clients: 3,
            horizon: 40,
        }
    }

    #[test]
    fn builds_nested_circuits() {
        let sc = scenario("serial(lvl(1, 2, 3), 4)", FaultAssignment::honest(4));
        let b = build(&sc).unwrap();
        assert_eq!(b.leaves, vec![0, 1, 2, 3]);
        assert_eq!(b.world.len(), 6);
        assert_eq!(b.world.bound(b.root), 2 * 24);
    }

    #[test]
    fn random_script_respects_fault_flags() {
        for seed in 0..50 {
            let mut sc = scenario("lvl(1, 2, 3)", FaultAssignment::nth(3, seed % 64));
            sc.seed = seed;
            // building fails if a stall or fork contradicts a flag
            build(&sc).unwrap();
            let r = random_script(&sc);
            for f in &r.forks {
                assert!(!sc.faults.0[f.leaf - 1].safe);
            }
        }
    }

    #[test]
    fn repeated_leaf_is_rejected() {
        let sc = scenario("lvl(1, 1, 2)", FaultAssignment::honest(2));
        assert!(matches!(build(&sc), Err(ScenarioError::Unsupported(_))));
    }
}
