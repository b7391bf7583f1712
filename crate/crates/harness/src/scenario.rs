//! Scenario files: everything needed to rerun one simulation.

use std::sync::Arc;

use interchain_circuits::CircuitNode;
use interchain_core::bits::FaultAssignment;
use interchain_core::ledger::Tick;
use interchain_core::simnet::{DelayPolicy, Mode, NetworkModel, ParticipantId};
use interchain_core::world::NodeId;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Observers are numbered from here so they never collide with gate writers.
pub const CLIENT_BASE: u64 = 0xc11e_0000;

pub fn client_id(i: usize) -> ParticipantId {
    ParticipantId(CLIENT_BASE + i as u64)
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("fault assignment has {got} entries but the circuit has {want} leaves")]
    FaultCount { got: usize, want: usize },
    #[error("leaf {0} is out of range")]
    LeafRange(usize),
    #[error("client {0} is out of range")]
    ClientRange(usize),
    #[error("bad circuit: {0}")]
    Circuit(String),
    #[error("bad network: {0}")]
    Network(String),
    #[error("cannot simulate: {0}")]
    Unsupported(String),
    #[error("scenario parse error: {0}")]
    Parse(String),
    #[error("world: {0}")]
    World(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub mode: Mode,
    pub delta: Tick,
    #[serde(default)]
    pub gst: Tick,
}

impl NetworkSpec {
    pub fn model(&self) -> Result<NetworkModel, ScenarioError> {
        NetworkModel { mode: self.mode, delta: self.delta, gst: self.gst }
            .validated()
            .map_err(|e| ScenarioError::Network(e.to_string()))
    }
}

/// Timing shared by every underlay chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainParams {
    #[serde(rename = "T")]
    pub epoch: Tick,
    pub tconf: Tick,
}

impl Default for ChainParams {
    fn default() -> ChainParams {
        ChainParams { epoch: 2, tconf: 4 }
    }
}

/// Who is looking: a client, or writer `index` of the gate at world node `gate`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObserverRef {
    Client(usize),
    Writer { gate: NodeId, index: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForkSpec {
    pub leaf: usize,
    #[serde(default)]
    pub parent: usize,
    #[serde(default)]
    pub at_height: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StallSpec {
    pub leaf: usize,
    /// Everyone when absent.
    #[serde(default)]
    pub observers: Option<Vec<ObserverRef>>,
    #[serde(default)]
    pub from: Tick,
    /// Forever when absent.
    #[serde(default)]
    pub until: Option<Tick>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PinSpec {
    pub leaf: usize,
    pub observer: ObserverRef,
    pub branch: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum InjectPayload {
    /// A user transaction wrapped as if submitted to the circuit root.
    Forward { tx: u64 },
    /// A snapshot for serial gate `gate` holding the given forwarded
    /// transactions, with no certificate.
    Snapshot { gate: NodeId, txs: Vec<u64> },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectSpec {
    pub leaf: usize,
    pub branch: usize,
    pub at: Tick,
    pub payload: InjectPayload,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Route {
    /// Transaction id for forwards, child index for relays.
    pub key: u64,
    pub branch: usize,
}

/// Before `until`, branch `b` of the leaf admits a forwarded transaction only
/// if it is unrouted or routed to `b`, and a relay of gate `gate` only if its
/// source child is routed to `b`. Everything else is admitted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub leaf: usize,
    pub gate: NodeId,
    pub until: Tick,
    #[serde(default)]
    pub forwards: Vec<Route>,
    #[serde(default)]
    pub relays: Vec<Route>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub leaf: usize,
    pub policy: DelayPolicy,
    #[serde(default)]
    pub censor_permille: u32,
    #[serde(default)]
    pub extra_delay: Tick,
    #[serde(default)]
    pub phantom_permille: u32,
}

/// Scripted misbehavior. Leaves are numbered from 1 as in circuit text.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdversaryScript {
    /// Draw extra misbehavior for every leaf from the scenario seed.
    #[serde(default)]
    pub random: bool,
    #[serde(default)]
    pub policies: Vec<PolicySpec>,
    #[serde(default)]
    pub forks: Vec<ForkSpec>,
    #[serde(default)]
    pub stalls: Vec<StallSpec>,
    #[serde(default)]
    pub pins: Vec<PinSpec>,
    #[serde(default)]
    pub injections: Vec<InjectSpec>,
    #[serde(default)]
    pub filters: Vec<FilterSpec>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TxSpec {
    pub id: u64,
    pub at: Tick,
    /// Only these leaves receive it. Such transactions are not judged for liveness.
    #[serde(default)]
    pub to: Option<Vec<usize>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub seed: u64,
    pub network: NetworkSpec,
    #[serde(default)]
    pub chains: ChainParams,
    /// Circuit in text form, e.g. `serial(1, lvl(2, 3, 4))`.
    pub circuit: String,
    pub faults: FaultAssignment,
    /// Leaves whose views carry no certificates.
    #[serde(default)]
    pub uncertified: Vec<usize>,
    /// Build serial gates that accept uncertified snapshots.
    #[serde(default)]
    pub serial_without_certificates: bool,
    #[serde(default)]
    pub adversary: AdversaryScript,
    pub txs: Vec<TxSpec>,
    #[serde(default = "default_clients")]
    pub clients: usize,
    pub horizon: Tick,
}

fn default_clients() -> usize {
    3
}

impl Scenario {
    pub fn circuit_node(&self) -> Result<Arc<CircuitNode>, ScenarioError> {
        let node: CircuitNode = self.circuit.parse().map_err(|e: interchain_circuits::NodeError| ScenarioError::Circuit(e.to_string()))?;
        Ok(Arc::new(node))
    }

    pub fn validate(&self) -> Result<Arc<CircuitNode>, ScenarioError> {
        let node = self.circuit_node()?;
        self.network.model()?;
        let k = node.arity();
        if self.faults.len() != k {
            return Err(ScenarioError::FaultCount { got: self.faults.len(), want: k });
        }
        let s = &self.adversary;
        let leaves = self
            .uncertified
            .iter()
            .chain(s.policies.iter().map(|p| &p.leaf))
            .chain(s.forks.iter().map(|p| &p.leaf))
            .chain(s.stalls.iter().map(|p| &p.leaf))
            .chain(s.pins.iter().map(|p| &p.leaf))
            .chain(s.injections.iter().map(|p| &p.leaf))
            .chain(s.filters.iter().map(|p| &p.leaf))
            .chain(self.txs.iter().filter_map(|t| t.to.as_ref()).flatten());
        for leaf in leaves {
            if *leaf == 0 || *leaf > k {
                return Err(ScenarioError::LeafRange(*leaf));
            }
        }
        let observers = s.stalls.iter().filter_map(|x| x.observers.as_ref()).flatten().chain(s.pins.iter().map(|p| &p.observer));
        for o in observers {
            if let ObserverRef::Client(c) = o {
                if *c >= self.clients {
                    return Err(ScenarioError::ClientRange(*c));
                }
            }
        }
        Ok(node)
    }

    pub fn from_toml(text: &str) -> Result<Scenario, ScenarioError> {
        toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    /// Reads TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))
        } else {
            Scenario::from_toml(text)
        }
    }
}
