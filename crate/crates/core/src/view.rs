use std::sync::Arc;

use crate::cert::{CertifiedLedger, Certificate};
use crate::ledger::{Ledger, Tick};

/// What an observer reads from a chain at some tick: the finalized ledger,
/// the timestamp of every entry, the timestamp of the head block and the
/// certificate for that ledger, if the chain issues one.
#[derive(Clone, Debug)]
pub struct View {
    /// Identifies where the stamps came from: two views with the same
    /// origin agree on the stamps of their common prefix.
    pub origin: u64,
    pub ledger: Ledger,
    stamps: Arc<Vec<Tick>>,
    pub head: Tick,
    pub cert: Option<Certificate>,
}

impl View {
    pub fn new(origin: u64, ledger: Ledger, stamps: Arc<Vec<Tick>>, head: Tick, cert: Option<Certificate>) -> View {
        debug_assert!(stamps.len() >= ledger.len());
        View { origin, ledger, stamps, head, cert }
    }

    pub fn empty() -> View {
        View { origin: 0, ledger: Ledger::empty(), stamps: Arc::new(Vec::new()), head: 0, cert: None }
    }

    /// Stamps derived from the submission ticks of the entries, made
    /// non-decreasing. The head is at least the last stamp.
    pub fn from_born(origin: u64, ledger: Ledger, head: Tick, cert: Option<Certificate>) -> View {
        let mut stamps = Vec::with_capacity(ledger.len());
        let mut acc = 0;
        for tx in ledger.iter() {
            acc = acc.max(tx.born);
            stamps.push(acc);
        }
        View { origin, ledger, stamps: Arc::new(stamps), head: head.max(acc), cert }
    }

    pub fn len(&self) -> usize {
        self.ledger.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ledger.is_empty()
    }

    pub fn stamp(&self, i: usize) -> Tick {
        self.stamps[i]
    }

    pub fn certified(&self) -> CertifiedLedger {
        CertifiedLedger { ledger: self.ledger.clone(), head: self.head, cert: self.cert }
    }
}
