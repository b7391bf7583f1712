//! Transactions, ledgers and the ledger algebra used by every gate.
//!
//! A [`Ledger`] is an immutable, cheaply clonable sequence of transactions.
//! Prefixes share storage with the ledger they were cut from, and every
//! ledger carries the running digest of each of its prefixes so that a
//! prefix can be identified without rehashing.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::{Digest, Hasher64};
use crate::gate::GateTx;

/// Simulation time in integer ticks.
pub type Tick = u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TxId(pub u64);

impl TxId {
    /// Deterministic id for a transaction derived from other identifiers.
    pub fn derive(parts: &[u64]) -> TxId {
        let mut h = Hasher64::new();
        for p in parts {
            h.write_u64(*p);
        }
        // Keep derived ids out of the small range used by injected transactions.
        TxId(h.finish().0 | (1 << 63))
    }

    pub fn is_derived(self) -> bool {
        self.0 >> 63 == 1
    }
}

impl fmt::Display for TxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_derived() {
            write!(f, "x{:012x}", self.0 & 0xffff_ffff_ffff)
        } else {
            write!(f, "tx{}", self.0)
        }
    }
}

#[derive(Clone, Debug)]
pub enum Payload {
    Data(Arc<[u8]>),
    Gate(Arc<GateTx>),
}

/// A transaction. Equality and hashing use the id only.
#[derive(Clone, Debug)]
pub struct Tx {
    pub id: TxId,
    /// Tick at which the transaction was first submitted.
    pub born: Tick,
    pub payload: Payload,
}

impl Tx {
    pub fn new(id: u64) -> Tx {
        Tx { id: TxId(id), born: 0, payload: Payload::Data(Arc::from(Vec::new())) }
    }

    pub fn with_born(id: u64, born: Tick) -> Tx {
        Tx { born, ..Tx::new(id) }
    }

    pub fn gate(&self) -> Option<&GateTx> {
        match &self.payload {
            Payload::Gate(g) => Some(g),
            Payload::Data(_) => None,
        }
    }
}

impl PartialEq for Tx {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl Eq for Tx {}

impl std::hash::Hash for Tx {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.id.hash(state)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LedgerError {
    #[error("interleave needs equal lengths, got {left} and {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("duplicate transaction {0} in ledger")]
    Duplicate(TxId),
}

/// Ordered sequence of transactions without duplicate ids.
#[derive(Clone)]
pub struct Ledger {
    txs: Arc<Vec<Tx>>,
    // digests[i] is the digest of the prefix of length i + 1
    digests: Arc<Vec<Digest>>,
    len: usize,
}

impl Default for Ledger {
    fn default() -> Self {
        Ledger::empty()
    }
}

impl Ledger {
    pub fn empty() -> Ledger {
        Ledger { txs: Arc::new(Vec::new()), digests: Arc::new(Vec::new()), len: 0 }
    }

    /// Builds a ledger, rejecting duplicate ids.
    pub fn new(txs: Vec<Tx>) -> Result<Ledger, LedgerError> {
        let mut seen = HashSet::with_capacity(txs.len());
        for tx in &txs {
            if !seen.insert(tx.id) {
                return Err(LedgerError::Duplicate(tx.id));
            }
        }
        Ok(Ledger::from_vec_unchecked(txs))
    }

    /// Builds a ledger without the uniqueness check. Used for raw gate
    /// outputs that may repeat an id and are cleaned by their consumers.
    pub fn from_vec_unchecked(txs: Vec<Tx>) -> Ledger {
        let mut digests = Vec::with_capacity(txs.len());
        let mut acc = Digest::ZERO;
        for tx in &txs {
            acc = acc.chain(tx.id.0);
            digests.push(acc);
        }
        let len = txs.len();
        Ledger { txs: Arc::new(txs), digests: Arc::new(digests), len }
    }

    /// Ledger of plain transactions with the given ids.
    pub fn of_ids(ids: &[u64]) -> Ledger {
        Ledger::new(ids.iter().map(|i| Tx::new(*i)).collect()).expect("distinct ids")
    }

    pub(crate) fn from_parts(txs: Arc<Vec<Tx>>, digests: Arc<Vec<Digest>>, len: usize) -> Ledger {
        debug_assert!(len <= txs.len() && len <= digests.len());
        Ledger { txs, digests, len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn txs(&self) -> &[Tx] {
        &self.txs[..self.len]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Tx> {
        self.txs().iter()
    }

    pub fn get(&self, i: usize) -> Option<&Tx> {
        self.txs().get(i)
    }

    pub fn ids(&self) -> Vec<TxId> {
        self.iter().map(|t| t.id).collect()
    }

    pub fn id_set(&self) -> HashSet<TxId> {
        self.iter().map(|t| t.id).collect()
    }

    pub fn contains(&self, id: TxId) -> bool {
        self.iter().any(|t| t.id == id)
    }

    /// The first `n` transactions (all of them if `n >= len`).
    pub fn prefix(&self, n: usize) -> Ledger {
        Ledger { txs: self.txs.clone(), digests: self.digests.clone(), len: n.min(self.len) }
    }

    /// Transactions from position `n` on.
    pub fn suffix(&self, n: usize) -> &[Tx] {
        &self.txs()[n.min(self.len)..]
    }

    /// Digest of the whole ledger.
    pub fn digest(&self) -> Digest {
        self.prefix_digest(self.len)
    }

    /// Digest of the prefix of length `n`.
    pub fn prefix_digest(&self, n: usize) -> Digest {
        if n == 0 {
            Digest::ZERO
        } else {
            self.digests[n.min(self.len) - 1]
        }
    }

    /// Appends transactions, returning a new ledger.
    pub fn extended<I: IntoIterator<Item = Tx>>(&self, more: I) -> Ledger {
        let mut v = self.txs().to_vec();
        v.extend(more);
        Ledger::from_vec_unchecked(v)
    }

    /// Canonical text encoding: ids in order, comma separated, in parentheses.
    pub fn encode(&self) -> String {
        let ids: Vec<String> = self.iter().map(|t| t.id.to_string()).collect();
        format!("({})", ids.join(","))
    }
}

impl PartialEq for Ledger {
    fn eq(&self, other: &Self) -> bool {
        self.len == other.len && self.digest() == other.digest() && self.txs() == other.txs()
    }
}

impl Eq for Ledger {}

impl fmt::Debug for Ledger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encode())
    }
}

impl fmt::Display for Ledger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encode())
    }
}

impl Serialize for Ledger {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.iter().map(|t| t.id.to_string()))
    }
}

/// True iff `a` is a leading segment of `b`.
pub fn is_prefix(a: &Ledger, b: &Ledger) -> bool {
    if a.len() > b.len() {
        return false;
    }
    if a.is_empty() {
        return true;
    }
    if Arc::ptr_eq(&a.txs, &b.txs) {
        return true;
    }
    a.digest() == b.prefix_digest(a.len()) && a.iter().zip(b.iter()).all(|(x, y)| x.id == y.id)
}

/// True iff one ledger is a prefix of the other.
pub fn consistent(a: &Ledger, b: &Ledger) -> bool {
    is_prefix(a, b) || is_prefix(b, a)
}

/// `a` followed by the transactions of `b` that `a` does not already hold,
/// keeping the first occurrence of every id.
pub fn clean(a: &Ledger, b: &Ledger) -> Ledger {
    let mut seen: HashSet<TxId> = HashSet::with_capacity(a.len() + b.len());
    let mut out = Vec::with_capacity(a.len() + b.len());
    for tx in a.iter() {
        if seen.insert(tx.id) {
            out.push(tx.clone());
        }
    }
    let a_distinct = out.len() == a.len();
    for tx in b.iter() {
        if seen.insert(tx.id) {
            out.push(tx.clone());
        }
    }
    if a_distinct && out.len() == a.len() {
        return a.clone();
    }
    Ledger::from_vec_unchecked(out)
}

/// Left fold of [`clean`] over a sequence of ledgers.
pub fn clean_all<'a, I: IntoIterator<Item = &'a Ledger>>(ledgers: I) -> Ledger {
    ledgers.into_iter().fold(Ledger::empty(), |acc, l| clean(&acc, l))
}

/// Removes repeated ids, keeping first occurrences.
pub fn sanitize(l: &Ledger) -> Ledger {
    clean(&Ledger::empty(), l)
}

/// Positional interleaving of two equal-length ledgers: a1, b1, a2, b2, ...
///
/// The result may repeat ids when the inputs share transactions.
pub fn interleave(a: &Ledger, b: &Ledger) -> Result<Ledger, LedgerError> {
    if a.len() != b.len() {
        return Err(LedgerError::LengthMismatch { left: a.len(), right: b.len() });
    }
    let mut out = Vec::with_capacity(2 * a.len());
    for (x, y) in a.iter().zip(b.iter()) {
        out.push(x.clone());
        out.push(y.clone());
    }
    Ok(Ledger::from_vec_unchecked(out))
}

/// Merge used by clients that never output a shorter ledger: keeps the
/// longer of two consistent ledgers and cleans conflicting ones together.
pub fn merge_monotone(prev: &Ledger, next: &Ledger) -> Ledger {
    if is_prefix(prev, next) {
        next.clone()
    } else if is_prefix(next, prev) {
        prev.clone()
    } else {
        clean(prev, next)
    }
}
