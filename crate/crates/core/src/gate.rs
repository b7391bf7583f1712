//! Transactions that composition gates write into their children.
//!
//! Every gate addresses what it writes to itself, so several gates can
//! share one child chain and each reads back only its own entries.

use std::sync::Arc;

use crate::ledger::{Ledger, Tick, Tx, TxId};
use crate::view::View;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GateId(pub u32);

#[derive(Clone, Debug)]
pub enum GateMsg {
    /// A transaction submitted to the gate.
    Forward(Tx),
    /// A certified output of the gate's first child (serial gates).
    Snapshot(View),
    /// A certified view of child `from` copied into another child (lvl gates).
    Relay { from: u32, view: View },
    /// Advances the contract clock of a child without a timestamped block.
    Heartbeat,
}

impl GateMsg {
    pub fn kind(&self) -> &'static str {
        match self {
            GateMsg::Forward(_) => "forward",
            GateMsg::Snapshot(_) => "snapshot",
            GateMsg::Relay { .. } => "relay",
            GateMsg::Heartbeat => "heartbeat",
        }
    }
}

#[derive(Clone, Debug)]
pub struct GateTx {
    pub gate: GateId,
    pub msg: GateMsg,
}

impl GateTx {
    /// Wraps `msg` into a transaction addressed to `gate`. `key` must make
    /// the id unique among this gate's writes.
    pub fn wrap(gate: GateId, key: &[u64], msg: GateMsg, born: Tick) -> Tx {
        let mut parts = Vec::with_capacity(key.len() + 1);
        parts.push(gate.0 as u64);
        parts.extend_from_slice(key);
        Tx { id: TxId::derive(&parts), born, payload: crate::ledger::Payload::Gate(Arc::new(GateTx { gate, msg })) }
    }

    /// Wrapper carrying a submitted transaction.
    pub fn forward(gate: GateId, tx: Tx) -> Tx {
        let born = tx.born;
        GateTx::wrap(gate, &[0xf0, tx.id.0], GateMsg::Forward(tx), born)
    }
}

/// Entries of `ledger` addressed to `gate`, with their positions.
pub fn addressed(ledger: &Ledger, gate: GateId) -> impl Iterator<Item = (usize, &GateMsg)> {
    ledger.iter().enumerate().filter_map(move |(i, tx)| match tx.gate() {
        Some(g) if g.gate == gate => Some((i, &g.msg)),
        _ => None,
    })
}

/// The transactions forwarded to `gate`, in ledger order.
pub fn forwarded(ledger: &Ledger, gate: GateId) -> Vec<Tx> {
    addressed(ledger, gate)
        .filter_map(|(_, m)| match m {
            GateMsg::Forward(tx) => Some(tx.clone()),
            _ => None,
        })
        .collect()
}
