//! Runs a circuit under every fault assignment and compares verdicts with
//! the properties the circuit algebra predicts.

use std::sync::Arc;

use interchain_circuits::CircuitNode;
use interchain_core::bits::FaultAssignment;
use interchain_core::digest::{mix_all, pick};
use interchain_core::ledger::Tick;
use interchain_core::simnet::{DelayPolicy, Mode};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::build::build;
use crate::judge::{LivenessVerdict, SafetyVerdict, Verdict};
use crate::run::run_and_judge;
use crate::scenario::{
    AdversaryScript, ChainParams, ForkSpec, InjectPayload, InjectSpec, NetworkSpec, ObserverRef, PinSpec, PolicySpec, Scenario,
    ScenarioError, StallSpec, TxSpec,
};

pub const DEFAULT_SWEEP_CAP: usize = 5;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("{k} chains give {cells} fault assignments, above the sweep cap of {cap} chains; pass a sample size to sweep a random subset of cells")]
    CapExceeded { k: usize, cap: usize, cells: u64 },
    #[error("lvs gates have no guarantees under partial synchrony; sweep them in synchronous mode")]
    LvsUnderPartialSynchrony,
    #[error("synchronous networks have gst 0")]
    SyncWithGst,
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepConfig {
    pub mode: Mode,
    pub delta: Tick,
    /// Every seed runs once per gst, or once in total with `gst_per_seed`.
    pub gsts: Vec<Tick>,
    /// Seed `i` runs only at `gsts[i % gsts.len()]`.
    pub gst_per_seed: bool,
    pub seeds: u64,
    pub base_seed: u64,
    pub chains: ChainParams,
    pub clients: usize,
    /// Also run the fixed split-view script once per gst in every cell.
    pub scripted: bool,
    pub cap: usize,
    /// Sweep this many cells, chosen from the seed, instead of all of them.
    pub sample: Option<usize>,
    pub threads: Option<usize>,
}

impl SweepConfig {
    pub fn new(mode: Mode, seeds: u64) -> SweepConfig {
        let gsts = match mode {
            Mode::PartialSynchrony => vec![0, 5, 20],
            Mode::Synchrony => vec![0],
        };
        SweepConfig {
            mode,
            delta: 2,
            gsts,
            gst_per_seed: false,
            seeds,
            base_seed: 0,
            chains: ChainParams::default(),
            clients: 3,
            scripted: true,
            cap: DEFAULT_SWEEP_CAP,
            sample: None,
            threads: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Cell {
    pub faults: FaultAssignment,
    pub label: String,
    pub predicted_safe: bool,
    pub predicted_live: bool,
    pub runs: usize,
    pub safety: SafetyVerdict,
    /// Scenario reproducing the safety witness.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub safety_replay: Option<Scenario>,
    pub liveness: LivenessVerdict,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub liveness_replay: Option<Scenario>,
    /// Largest latency over the runs where liveness held.
    pub worst_latency: Option<Tick>,
    pub contradiction: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Matrix {
    pub circuit: String,
    pub k: usize,
    pub mode: Mode,
    pub bound: Tick,
    pub config: SweepConfig,
    pub runs: usize,
    pub cells: Vec<Cell>,
    pub contradictions: usize,
}

impl Matrix {
    pub fn cell(&self, faults: &FaultAssignment) -> Option<&Cell> {
        self.cells.iter().find(|c| &c.faults == faults)
    }
}

/// Transaction schedule drawn from the seed: one before or at GST, two after.
fn schedule(seed: u64, gst: Tick, chains: ChainParams) -> Vec<TxSpec> {
    let t1 = 1 + pick(mix_all(&[seed, 0x71]), gst + 1);
    let t2 = gst + pick(mix_all(&[seed, 0x72]), 2 * chains.tconf + 1);
    let t3 = t2 + 1 + pick(mix_all(&[seed, 0x73]), chains.tconf);
    vec![TxSpec { id: 1, at: t1, to: None }, TxSpec { id: 2, at: t2, to: None }, TxSpec { id: 3, at: t3, to: None }]
}

/// Fixed worst case: every faulty chain splits the clients by parity.
fn split_script(faults: &FaultAssignment, clients: usize, epoch: Tick) -> AdversaryScript {
    let mut s = AdversaryScript::default();
    for (i, f) in faults.0.iter().enumerate() {
        let leaf = i + 1;
        let mut p = PolicySpec { leaf, policy: DelayPolicy::Max, censor_permille: 0, extra_delay: 0, phantom_permille: 0 };
        let side = |c: usize| (c + leaf) % 2;
        if !f.live {
            let half: Vec<ObserverRef> = (0..clients).filter(|c| side(*c) == 0).map(ObserverRef::Client).collect();
            s.stalls.push(StallSpec { leaf, observers: Some(half), from: 0, until: None });
        }
        if !f.safe {
            p.phantom_permille = 1000;
            s.forks.push(ForkSpec { leaf, parent: 0, at_height: 0 });
            for c in 0..clients {
                s.pins.push(PinSpec { leaf, observer: ObserverRef::Client(c), branch: side(c) });
            }
            s.injections.push(InjectSpec { leaf, branch: 1, at: epoch, payload: InjectPayload::Forward { tx: 3 } });
        }
        s.policies.push(p);
    }
    s
}

fn cell_scenarios(circuit: &str, faults: &FaultAssignment, bound: Tick, cfg: &SweepConfig) -> Vec<Scenario> {
    let mut out = Vec::new();
    for (g, &gst) in cfg.gsts.iter().enumerate() {
        let mut push = |seed: u64, adversary: AdversaryScript, name: String| {
            let txs = schedule(seed, gst, cfg.chains);
            let last = txs.iter().map(|t| t.at).max().unwrap_or(0).max(gst);
            out.push(Scenario {
                name,
                seed,
                network: NetworkSpec { mode: cfg.mode, delta: cfg.delta, gst },
                chains: cfg.chains,
                circuit: circuit.to_string(),
                faults: faults.clone(),
                uncertified: vec![],
                serial_without_certificates: false,
                adversary,
                txs,
                clients: cfg.clients,
                horizon: last + bound + 2,
            });
        };
        if cfg.scripted {
            push(mix_all(&[cfg.base_seed, gst, 0x5b1]), split_script(faults, cfg.clients, cfg.chains.epoch), format!("split {}", faults.label()));
        }
        for i in 0..cfg.seeds {
            if cfg.gst_per_seed && i % cfg.gsts.len() as u64 != g as u64 {
                continue;
            }
            let seed = mix_all(&[cfg.base_seed, i, gst]);
            push(seed, AdversaryScript { random: true, ..AdversaryScript::default() }, format!("random {} #{i}", faults.label()));
        }
    }
    out
}

fn aggregate(faults: FaultAssignment, predicted: (bool, bool), runs: Vec<(Scenario, Verdict)>) -> Cell {
    let mut safety = (SafetyVerdict::Held, None);
    let mut liveness = (LivenessVerdict::Held { worst_latency: None, judged: 0, pending: 0 }, None);
    let mut worst_latency = None;
    let (mut judged, mut pending) = (0, 0);
    for (sc, v) in &runs {
        if safety.0.held() && !v.safety.held() {
            safety = (v.safety.clone(), Some(sc.clone()));
        }
        match &v.liveness {
            LivenessVerdict::Held { worst_latency: w, judged: j, pending: p } => {
                worst_latency = worst_latency.max(*w);
                judged += j;
                pending += p;
            }
            LivenessVerdict::Violated { .. } if liveness.0.held() => liveness = (v.liveness.clone(), Some(sc.clone())),
            LivenessVerdict::Violated { .. } => {}
        }
    }
    if liveness.0.held() {
        liveness.0 = LivenessVerdict::Held { worst_latency, judged, pending };
    }
    let contradiction = (predicted.0 && !safety.0.held()) || (predicted.1 && !liveness.0.held());
    Cell {
        label: faults.label(),
        faults,
        predicted_safe: predicted.0,
        predicted_live: predicted.1,
        runs: runs.len(),
        safety: safety.0,
        safety_replay: safety.1,
        liveness: liveness.0,
        liveness_replay: liveness.1,
        worst_latency,
        contradiction,
    }
}

/// The cells a sweep visits: all `4^k`, or a seeded sample of them.
pub fn cells(k: usize, cfg: &SweepConfig) -> Result<Vec<FaultAssignment>, SweepError> {
    let total = 1u64 << (2 * k);
    match cfg.sample {
        None if k > cfg.cap => Err(SweepError::CapExceeded { k, cap: cfg.cap, cells: total }),
        None => Ok((0..total).map(|i| FaultAssignment::nth(k, i)).collect()),
        Some(n) => {
            let mut idx: Vec<u64> = (0..total).collect();
            idx.sort_by_key(|i| mix_all(&[cfg.base_seed, *i, 0x5a3]));
            idx.truncate(n);
            idx.sort();
            Ok(idx.into_iter().map(|i| FaultAssignment::nth(k, i)).collect())
        }
    }
}

pub fn sweep(circuit: &Arc<CircuitNode>, cfg: &SweepConfig) -> Result<Matrix, SweepError> {
    if cfg.mode == Mode::PartialSynchrony && circuit.contains_lvs() {
        return Err(SweepError::LvsUnderPartialSynchrony);
    }
    if cfg.mode == Mode::Synchrony && cfg.gsts.iter().any(|g| *g != 0) {
        return Err(SweepError::SyncWithGst);
    }
    let k = circuit.arity();
    let text = circuit.to_string();
    let assignments = cells(k, cfg)?;

    // the bound does not depend on faults
    let probe = Scenario {
        name: String::new(),
        seed: 0,
        network: NetworkSpec { mode: cfg.mode, delta: cfg.delta, gst: 0 },
        chains: cfg.chains,
        circuit: text.clone(),
        faults: FaultAssignment::honest(k),
        uncertified: vec![],
        serial_without_certificates: false,
        adversary: AdversaryScript::default(),
        txs: vec![],
        clients: cfg.clients,
        horizon: 0,
    };
    let built = build(&probe)?;
    let bound = built.world.bound(built.root);
    drop(built);

    let jobs: Vec<(usize, Scenario)> = assignments
        .iter()
        .enumerate()
        .flat_map(|(i, f)| cell_scenarios(&text, f, bound, cfg).into_iter().map(move |s| (i, s)))
        .collect();
    let work = || -> Result<Vec<(usize, Scenario, Verdict)>, ScenarioError> {
        jobs.into_par_iter().map(|(i, sc)| run_and_judge(&sc).map(|v| (i, sc, v))).collect()
    };
    let results = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| SweepError::Pool(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    let runs = results.len();
    let mut grouped: Vec<Vec<(Scenario, Verdict)>> = vec![Vec::new(); assignments.len()];
    for (i, sc, v) in results {
        grouped[i].push((sc, v));
    }
    let cells: Vec<Cell> = assignments
        .into_iter()
        .zip(grouped)
        .map(|(f, runs)| {
            let predicted = circuit.eval(&f.safety(), &f.liveness());
            aggregate(f, predicted, runs)
        })
        .collect();
    let contradictions = cells.iter().filter(|c| c.contradiction).count();
    Ok(Matrix { circuit: text, k, mode: cfg.mode, bound, config: cfg.clone(), runs, cells, contradictions })
}
