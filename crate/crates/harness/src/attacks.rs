//! Scripted attacks. Each builder returns an ordinary [`Scenario`], so an
//! attack reruns and round-trips through a scenario file like any other run.

use std::collections::BTreeSet;
use std::sync::Arc;

use interchain_circuits::{check_general_psync, check_general_sync, CircuitNode, Characterization, Point, Unachievable};
use interchain_core::bits::{BitVector, ChainFault, FaultAssignment};
use interchain_core::ledger::Tick;
use interchain_core::simnet::{DelayPolicy, Mode};
use interchain_core::world::NodeId;
use serde::Serialize;
use thiserror::Error;

use crate::build::{build, Built};
use crate::judge::Verdict;
use crate::run::run_and_judge;
use crate::scenario::{
    AdversaryScript, ChainParams, FilterSpec, ForkSpec, InjectPayload, InjectSpec, NetworkSpec, ObserverRef, PinSpec, PolicySpec,
    Route, Scenario, ScenarioError, StallSpec, TxSpec,
};

#[derive(Debug, Error)]
pub enum AttackError {
    #[error("claim covers {claim} chains but the circuit has {circuit}")]
    Arity { claim: usize, circuit: usize },
    #[error("claim has no {0} element")]
    EmptyClaim(&'static str),
    #[error("bad claim: {0}")]
    Claim(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
}

/// One library entry: a scenario plus what the attacked claim promises for it.
#[derive(Clone, Debug, Serialize)]
pub struct Attack {
    pub name: String,
    pub summary: String,
    pub scenario: Scenario,
    /// The attacked claim promises safety under the scenario's faults.
    pub claim_safe: bool,
    /// The claim fails its achievability check, so a break is expected.
    pub instantiated: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct AttackOutcome {
    pub name: String,
    pub verdict: Verdict,
    pub claim_safe: bool,
    /// A safety violation under faults the claim calls safe.
    pub refutes_claim: bool,
}

impl Attack {
    pub fn run(&self) -> Result<AttackOutcome, ScenarioError> {
        let verdict = run_and_judge(&self.scenario)?;
        let refutes_claim = self.claim_safe && !verdict.safety.held();
        Ok(AttackOutcome { name: self.name.clone(), verdict, claim_safe: self.claim_safe, refutes_claim })
    }
}

fn all_live(safe: &[bool]) -> FaultAssignment {
    FaultAssignment(safe.iter().map(|s| ChainFault { safe: *s, live: true }).collect())
}

fn min_delay(k: usize) -> Vec<PolicySpec> {
    (1..=k)
        .map(|leaf| PolicySpec { leaf, policy: DelayPolicy::Min, censor_permille: 0, extra_delay: 0, phantom_permille: 0 })
        .collect()
}

fn claim_admits(claim: &Characterization, faults: &FaultAssignment) -> Result<bool, AttackError> {
    let (safety, _) = claim.tables().map_err(|e| AttackError::Claim(e.to_string()))?;
    Ok(safety.contains(&faults.safety(), &faults.liveness()))
}

fn extremes(claim: &Characterization) -> Result<(Vec<Point>, Vec<Point>), AttackError> {
    let (es, el) = claim.canonical().map_err(|e| AttackError::Claim(e.to_string()))?;
    Ok((es.into_iter().collect(), el.into_iter().collect()))
}

/// A serial gate whose first child carries no certificates. The second
/// chain forks, and one fork carries a forged snapshot of the first chain.
/// With `certified`, the same script runs against the checked gate.
pub fn uncertified_serial_fork(certified: bool) -> Attack {
    let epoch = ChainParams::default().epoch;
    let scenario = Scenario {
        name: if certified { "certified-serial-fork" } else { "uncertified-serial-fork" }.into(),
        seed: 11,
        network: NetworkSpec { mode: Mode::PartialSynchrony, delta: 2, gst: 0 },
        chains: ChainParams::default(),
        circuit: "serial(1, 2)".into(),
        faults: all_live(&[true, false]),
        uncertified: if certified { vec![] } else { vec![1] },
        serial_without_certificates: !certified,
        adversary: AdversaryScript {
            policies: min_delay(2),
            forks: vec![ForkSpec { leaf: 2, parent: 0, at_height: 0 }],
            pins: vec![
                PinSpec { leaf: 2, observer: ObserverRef::Client(0), branch: 0 },
                PinSpec { leaf: 2, observer: ObserverRef::Client(1), branch: 1 },
            ],
            injections: vec![InjectSpec {
                leaf: 2,
                branch: 0,
                at: epoch,
                payload: InjectPayload::Snapshot { gate: 2, txs: vec![101, 102] },
            }],
            ..AdversaryScript::default()
        },
        txs: vec![TxSpec { id: 1, at: 1, to: None }, TxSpec { id: 2, at: 2, to: None }],
        clients: 2,
        horizon: 40,
    };
    Attack {
        name: scenario.name.clone(),
        summary: if certified {
            "forged snapshot against a serial gate that checks certificates".into()
        } else {
            "forged snapshot on one fork of the second chain; the first chain issues no certificates".into()
        },
        claim_safe: true,
        instantiated: !certified,
        scenario,
    }
}

fn probe(circuit: &Arc<CircuitNode>, k: usize, mode: Mode) -> Result<Built, ScenarioError> {
    build(&Scenario {
        name: String::new(),
        seed: 0,
        network: NetworkSpec { mode, delta: 2, gst: 0 },
        chains: ChainParams::default(),
        circuit: circuit.to_string(),
        faults: FaultAssignment::honest(k),
        uncertified: vec![],
        serial_without_certificates: false,
        adversary: AdversaryScript::default(),
        txs: vec![],
        clients: 2,
        horizon: 0,
    })
}

/// Which side of the split each chain belongs to.
struct Sides {
    side0: BTreeSet<usize>,
    side1: BTreeSet<usize>,
    forked: BTreeSet<usize>,
}

impl Sides {
    fn of(&self, leaf: usize) -> Option<usize> {
        if self.side0.contains(&leaf) {
            Some(0)
        } else if self.side1.contains(&leaf) {
            Some(1)
        } else {
            None
        }
    }
}

/// Splits clients 0 and 1 apart: each side's chains are hidden from the
/// other side's client and writers by `stall`, and every forked chain
/// shows each side its own branch. Forwards of tx 1 and tx 2 and the relays
/// of each side's chains are routed to that side's branch until `until`.
fn split_world(built: &Built, sides: &Sides, until: Option<Tick>, script: &mut AdversaryScript) {
    let leaf_of = |n: NodeId| built.leaves.iter().position(|x| *x == n).map(|i| i + 1);
    let mut observers: [Vec<ObserverRef>; 2] = [vec![ObserverRef::Client(0)], vec![ObserverRef::Client(1)]];
    let mut neutral = Vec::new();
    for gate in built.leaves.len()..built.world.len() {
        for (index, w) in built.world.writers(gate).iter().enumerate() {
            let who = ObserverRef::Writer { gate, index };
            match leaf_of(w.writes).and_then(|l| sides.of(l)) {
                Some(s) => observers[s].push(who),
                None => neutral.push(who),
            }
        }
    }
    for (s, chains) in [&sides.side0, &sides.side1].into_iter().enumerate() {
        for &leaf in chains {
            script.stalls.push(StallSpec { leaf, observers: Some(observers[1 - s].clone()), from: 0, until });
        }
    }
    for &leaf in &sides.forked {
        script.forks.push(ForkSpec { leaf, parent: 0, at_height: 0 });
        for (s, obs) in observers.iter().enumerate() {
            for o in obs {
                script.pins.push(PinSpec { leaf, observer: *o, branch: s });
            }
        }
        for o in &neutral {
            script.pins.push(PinSpec { leaf, observer: *o, branch: 0 });
        }
        // route through the first gate that reads this chain directly
        let node = built.leaves[leaf - 1];
        let gate = (built.leaves.len()..built.world.len()).find(|g| built.world.writers(*g).iter().any(|w| w.writes == node));
        if let Some(gate) = gate {
            let children: Vec<NodeId> = {
                let mut c: Vec<NodeId> = built.world.writers(gate).iter().map(|w| w.writes).collect();
                c.dedup();
                c
            };
            let relays = children
                .iter()
                .enumerate()
                .filter_map(|(i, n)| leaf_of(*n).and_then(|l| sides.of(l)).map(|s| Route { key: i as u64, branch: s }))
                .collect();
            script.filters.push(FilterSpec {
                leaf,
                gate,
                until: until.unwrap_or(Tick::MAX),
                forwards: vec![Route { key: 1, branch: 0 }, Route { key: 2, branch: 1 }],
                relays,
            });
        }
    }
}

/// The three-world attack under partial synchrony. Two liveness quorums
/// `l1`, `l2` of the claim and a safety element `s` with no chain common to
/// all three give the split: chains in `l1 ∩ l2` outside `s` fork, the rest
/// of `l1` and of `l2` are hidden from the other side until GST, and every
/// other chain stalls until GST. Each side sees a live quorum and commits
/// its own transaction first. When the claim passes the check, the first
/// triple is used and the attack degrades to a legal schedule.
pub fn three_world(circuit: &Arc<CircuitNode>, claim: &Characterization, seed: u64) -> Result<Attack, AttackError> {
    let k = circuit.arity();
    if claim.k() != k {
        return Err(AttackError::Arity { claim: claim.k(), circuit: k });
    }
    let general = claim.to_general().map_err(|e| AttackError::Claim(e.to_string()))?;
    let (es, el) = extremes(&general)?;
    let (l1, l2, s, instantiated) = match check_general_psync(&general) {
        Err(Unachievable::EmptyIntersection { l1, l2, s }) => (l1, l2, s, true),
        _ => {
            let l1 = *el.first().ok_or(AttackError::EmptyClaim("liveness"))?;
            let l2 = *el.get(1).unwrap_or(&l1);
            let s = *es.first().ok_or(AttackError::EmptyClaim("safety"))?;
            (l1, l2, s, false)
        }
    };
    let q = l1.l.and(&l2.l);
    let members = |v: &BitVector| (1..=k).filter(|i| v.get(i - 1)).collect::<BTreeSet<usize>>();
    let (q1, q2, qq) = (members(&l1.l), members(&l2.l), members(&q));
    let forked: BTreeSet<usize> = qq.iter().filter(|i| !s.s.get(*i - 1)).copied().collect();
    let sides = Sides { side0: &q1 - &qq, side1: &q2 - &qq, forked };
    let rest: Vec<usize> = (1..=k).filter(|i| !q1.contains(i) && !q2.contains(i)).collect();

    let built = probe(circuit, k, Mode::PartialSynchrony)?;
    let bound = built.world.bound(built.root);
    let gst = 2 * bound + 12;
    let mut script = AdversaryScript { policies: min_delay(k), ..AdversaryScript::default() };
    split_world(&built, &sides, Some(gst), &mut script);
    for leaf in rest {
        script.stalls.push(StallSpec { leaf, observers: None, from: 0, until: Some(gst) });
    }
    let safe: Vec<bool> = (1..=k).map(|i| !sides.forked.contains(&i)).collect();
    let faults = all_live(&safe);
    let to0: Vec<usize> = (&sides.side0 | &qq).into_iter().collect();
    let to1: Vec<usize> = (&sides.side1 | &qq).into_iter().collect();
    let scenario = Scenario {
        name: format!("three-world {circuit}"),
        seed,
        network: NetworkSpec { mode: Mode::PartialSynchrony, delta: 2, gst },
        chains: ChainParams::default(),
        circuit: circuit.to_string(),
        faults: faults.clone(),
        uncertified: vec![],
        serial_without_certificates: false,
        adversary: script,
        txs: vec![TxSpec { id: 1, at: 1, to: Some(to0) }, TxSpec { id: 2, at: 1, to: Some(to1) }],
        clients: 2,
        horizon: gst + bound + 4,
    };
    Ok(Attack {
        name: scenario.name.clone(),
        summary: format!("quorums {l1} and {l2} against safety element {s}"),
        claim_safe: claim_admits(&general, &faults)?,
        instantiated,
        scenario,
    })
}

/// The synchronous converse worlds. Two liveness quorums and a safety
/// element violating the synchronous clause give the split: `l1` holds no
/// chain that is safe and live under `s`, so its private chains go silent
/// toward client 1 forever, while `l2`'s private chains stay safe and live
/// and shared chains outside `s` fork.
pub fn sync_converse(circuit: &Arc<CircuitNode>, claim: &Characterization, seed: u64) -> Result<Attack, AttackError> {
    let k = circuit.arity();
    if claim.k() != k {
        return Err(AttackError::Arity { claim: claim.k(), circuit: k });
    }
    let general = claim.to_general().map_err(|e| AttackError::Claim(e.to_string()))?;
    let (es, el) = extremes(&general)?;
    let (mut l1, mut l2, s, instantiated) = match check_general_sync(&general) {
        Err(Unachievable::SyncClause { l1, l2, s }) => (l1, l2, s, true),
        _ => {
            let l1 = *el.first().ok_or(AttackError::EmptyClaim("liveness"))?;
            let l2 = *el.get(1).unwrap_or(&l1);
            let s = *es.first().ok_or(AttackError::EmptyClaim("safety"))?;
            (l1, l2, s, false)
        }
    };
    let good = s.s.and(&s.l);
    if l1.l.and(&good).count() > 0 && l2.l.and(&good).count() == 0 {
        std::mem::swap(&mut l1, &mut l2);
    }
    let members = |v: &BitVector| (1..=k).filter(|i| v.get(i - 1)).collect::<BTreeSet<usize>>();
    let (q1, q2, qq) = (members(&l1.l), members(&l2.l), members(&l1.l.and(&l2.l)));
    let forked: BTreeSet<usize> = qq.iter().filter(|i| !s.s.get(*i - 1)).copied().collect();
    // only chains of l1 that the claim does not need live can go silent
    let silent: BTreeSet<usize> = (&q1 - &qq).into_iter().filter(|i| !s.l.get(i - 1)).collect();
    let sides = Sides { side0: silent.clone(), side1: BTreeSet::new(), forked };

    let built = probe(circuit, k, Mode::Synchrony)?;
    let bound = built.world.bound(built.root);
    let mut script = AdversaryScript { policies: min_delay(k), ..AdversaryScript::default() };
    split_world(&built, &sides, None, &mut script);
    let faults = FaultAssignment(
        (1..=k).map(|i| ChainFault { safe: !sides.forked.contains(&i), live: !silent.contains(&i) }).collect(),
    );
    let to0: Vec<usize> = (&q1 | &qq).into_iter().collect();
    let to1: Vec<usize> = (&(&q2 - &qq) | &qq).into_iter().collect();
    let scenario = Scenario {
        name: format!("sync-converse {circuit}"),
        seed,
        network: NetworkSpec { mode: Mode::Synchrony, delta: 2, gst: 0 },
        chains: ChainParams::default(),
        circuit: circuit.to_string(),
        faults: faults.clone(),
        uncertified: vec![],
        serial_without_certificates: false,
        adversary: script,
        txs: vec![TxSpec { id: 1, at: 1, to: Some(to0) }, TxSpec { id: 2, at: 1, to: Some(to1) }],
        clients: 2,
        horizon: 3 * bound + 8,
    };
    Ok(Attack {
        name: scenario.name.clone(),
        summary: format!("quorums {l1} and {l2} against safety element {s}"),
        claim_safe: claim_admits(&general, &faults)?,
        instantiated,
        scenario,
    })
}

/// Two safe chains interleaved in parallel, each stalled in the view of a
/// different client.
pub fn naive_parallel(seed: u64) -> Attack {
    let scenario = Scenario {
        name: "naive-parallel".into(),
        seed,
        network: NetworkSpec { mode: Mode::Synchrony, delta: 2, gst: 0 },
        chains: ChainParams::default(),
        circuit: "lvs(1, 2)".into(),
        faults: FaultAssignment(vec![ChainFault { safe: true, live: false }; 2]),
        uncertified: vec![],
        serial_without_certificates: false,
        adversary: AdversaryScript {
            policies: min_delay(2),
            stalls: vec![
                StallSpec { leaf: 1, observers: Some(vec![ObserverRef::Client(1)]), from: 0, until: None },
                StallSpec { leaf: 2, observers: Some(vec![ObserverRef::Client(0)]), from: 0, until: None },
            ],
            ..AdversaryScript::default()
        },
        txs: vec![TxSpec { id: 1, at: 1, to: Some(vec![1]) }, TxSpec { id: 2, at: 1, to: Some(vec![2]) }],
        clients: 2,
        horizon: 40,
    };
    Attack {
        name: scenario.name.clone(),
        summary: "each client sees only one of two safe chains".into(),
        // both chains safe: a claim of safety from safe chains alone
        claim_safe: true,
        instantiated: true,
        scenario,
    }
}

fn ksl_claim(k: usize, s: usize, l: usize) -> Characterization {
    Characterization::ksl(k, s, l)
}

fn points(k: usize, safety: &[&str], liveness: &[&str]) -> Characterization {
    let p = |t: &&str| Point::parse(t).expect("valid point");
    Characterization::general(k, safety.iter().map(p), liveness.iter().map(p)).expect("valid claim")
}

/// Every attack, with the instantiations used by the acceptance suite.
pub fn attack_library() -> Vec<Attack> {
    let lvl: Arc<CircuitNode> = Arc::new("lvl(1, 2, 3)".parse().expect("circuit"));
    let lvs: Arc<CircuitNode> = Arc::new("lvs(1, 2)".parse().expect("circuit"));
    let synthesized = interchain_circuits::synth::synthesize_ksl(3, 3, 2).expect("achievable");
    let named = |mut a: Attack, name: &str| {
        a.name = name.into();
        a.scenario.name = name.into();
        a
    };
    vec![
        uncertified_serial_fork(false),
        uncertified_serial_fork(true),
        named(three_world(&lvl, &ksl_claim(3, 2, 2), 21).expect("attack builds"), "three-world-322"),
        named(three_world(&synthesized, &ksl_claim(3, 3, 2), 21).expect("attack builds"), "three-world-332"),
        named(sync_converse(&lvs, &points(2, &["11/00"], &["00/10", "00/01"]), 31).expect("attack builds"), "sync-converse-unsafe"),
        named(sync_converse(&lvs, &points(2, &["11/11"], &["00/10", "00/01"]), 31).expect("attack builds"), "sync-converse-legal"),
        naive_parallel(41),
    ]
}
