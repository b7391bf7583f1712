//! Runs a scenario tick by tick and records what every client outputs.

use std::collections::BTreeSet;

use interchain_core::ledger::{sanitize, Ledger, Tick, Tx};
use serde::{Deserialize, Serialize};

use crate::build::build;
use crate::judge::{judge_liveness, judge_safety, Verdict};
use crate::scenario::{Scenario, ScenarioError};

/// A transaction the liveness judge is responsible for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Injected {
    pub id: u64,
    pub at: Tick,
}

pub struct Trace {
    pub gst: Tick,
    pub horizon: Tick,
    /// Latency bound derived from the circuit.
    pub bound: Tick,
    /// `outputs[client][t]`, sanitized.
    pub outputs: Vec<Vec<Ledger>>,
    pub injected: Vec<Injected>,
    pub warnings: Vec<String>,
}

pub fn run(sc: &Scenario) -> Result<Trace, ScenarioError> {
    let built = build(sc)?;
    let world = &built.world;
    let mut outputs = vec![Vec::with_capacity(sc.horizon as usize + 1); built.clients.len()];
    let mut injected = Vec::new();
    for t in 0..=sc.horizon {
        for spec in sc.txs.iter().filter(|x| x.at == t) {
            let tx = Tx::with_born(spec.id, t);
            match &spec.to {
                None => {
                    world.submit(built.root, tx, t).map_err(|e| ScenarioError::World(e.to_string()))?;
                    injected.push(Injected { id: spec.id, at: t });
                }
                Some(leaves) => {
                    let nodes: BTreeSet<usize> = leaves.iter().map(|l| built.leaves[l - 1]).collect();
                    world.submit_to_leaves(built.root, tx, t, &nodes).map_err(|e| ScenarioError::World(e.to_string()))?;
                }
            }
        }
        world.step(t);
        for (c, who) in built.clients.iter().enumerate() {
            outputs[c].push(sanitize(&world.view(built.root, *who, t).ledger));
        }
    }
    Ok(Trace {
        gst: sc.network.gst,
        horizon: sc.horizon,
        bound: world.bound(built.root),
        outputs,
        injected,
        warnings: world.warnings().to_vec(),
    })
}

/// Runs and judges a scenario against its own derived bound.
pub fn run_and_judge(sc: &Scenario) -> Result<Verdict, ScenarioError> {
    let trace = run(sc)?;
    Ok(Verdict { safety: judge_safety(&trace), liveness: judge_liveness(&trace, trace.bound) })
}
