//! Pareto-optimal permutation invariant characterizations.

use std::collections::BTreeSet;

use interchain_core::simnet::Mode;

use crate::charac::{Characterization, Triple};

/// One member per liveness threshold `m` with `k/2 < m <= k`: safe with
/// `2(k-m)+1` safe chains (or, under synchrony, `k-m+1` safe and live
/// chains), live with `m` live chains.
pub fn pareto_set(k: usize, mode: Mode) -> Vec<Characterization> {
    (k / 2 + 1..=k)
        .map(|m| {
            let mut safety = BTreeSet::from([Triple(2 * (k - m) + 1, 0, 0)]);
            if mode == Mode::Synchrony {
                safety.insert(Triple(0, 0, k - m + 1));
            }
            Characterization::PermInvariant { k, safety, liveness: BTreeSet::from([Triple(0, m, 0)]) }
        })
        .collect()
}
