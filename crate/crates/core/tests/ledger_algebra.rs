use std::collections::HashSet;

use interchain_core::ledger::{clean, consistent, interleave, is_prefix, merge_monotone, sanitize, Ledger, Tx};
use interchain_core::simnet::{NetworkModel, ParticipantId};
use interchain_core::underlay::{ChainAdversary, ChainConfig};
use interchain_core::world::{lvs_output, World};
use proptest::prelude::*;

fn ledger(ids: &[u64]) -> Ledger {
    Ledger::from_vec_unchecked(ids.iter().map(|i| Tx::new(*i)).collect())
}

fn ids(l: &Ledger) -> Vec<u64> {
    l.iter().map(|t| t.id.0).collect()
}

fn dedup(xs: impl IntoIterator<Item = u64>) -> Vec<u64> {
    let mut out: Vec<u64> = Vec::new();
    for x in xs {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

/// Small alphabet so ledgers share and repeat ids often.
fn raw() -> impl Strategy<Value = Vec<u64>> {
    prop::collection::vec(0u64..8, 0..10)
}

/// Lvs rule written out on plain vectors.
fn lvs_oracle(a_lag: &[u64], a_now: &[u64], b_lag: &[u64], b_now: &[u64]) -> Vec<u64> {
    let ell = a_lag.len().min(b_lag.len());
    let mut out = Vec::new();
    for i in 0..ell {
        out.push(a_now[i]);
        out.push(b_now[i]);
    }
    let holds = a_lag.iter().all(|x| b_now.contains(x)) && b_lag.iter().all(|x| a_now.contains(x));
    if !holds {
        let longer = if a_lag.len() >= b_lag.len() { a_now } else { b_now };
        out.extend_from_slice(&longer[ell..]);
    }
    out
}

proptest! {
    #[test]
    fn prefix_matches_slices(a in raw(), b in raw()) {
        prop_assert_eq!(is_prefix(&ledger(&a), &ledger(&b)), b.starts_with(&a));
        prop_assert_eq!(consistent(&ledger(&a), &ledger(&b)), b.starts_with(&a) || a.starts_with(&b));
    }

    #[test]
    fn clean_keeps_first_occurrences(a in raw(), b in raw()) {
        let got = ids(&clean(&ledger(&a), &ledger(&b)));
        prop_assert_eq!(got, dedup(a.iter().chain(&b).copied()));
        prop_assert_eq!(ids(&sanitize(&ledger(&a))), dedup(a.iter().copied()));
    }

    #[test]
    fn merge_never_shrinks(a in raw(), b in raw()) {
        let (a, b) = (sanitize(&ledger(&a)), sanitize(&ledger(&b)));
        let m = merge_monotone(&a, &b);
        prop_assert!(is_prefix(&a, &m));
        let held: HashSet<u64> = ids(&m).into_iter().collect();
        prop_assert!(ids(&b).iter().all(|x| held.contains(x)));
    }

    #[test]
    fn interleave_alternates(a in raw(), b in raw()) {
        let n = a.len().min(b.len());
        let got = ids(&interleave(&ledger(&a[..n]), &ledger(&b[..n])).unwrap());
        let want: Vec<u64> = a[..n].iter().zip(&b[..n]).flat_map(|(x, y)| [*x, *y]).collect();
        prop_assert_eq!(got, want);
        if a.len() != b.len() {
            prop_assert!(interleave(&ledger(&a), &ledger(&b)).is_err());
        }
    }

    #[test]
    fn lvs_rule_matches_oracle(a in raw(), b in raw(), cut_a in 0usize..10, cut_b in 0usize..10) {
        let (a_lag, b_lag) = (&a[..cut_a.min(a.len())], &b[..cut_b.min(b.len())]);
        let got = lvs_output(&ledger(a_lag), &ledger(&a), &ledger(b_lag), &ledger(&b));
        prop_assert_eq!(ids(&got), lvs_oracle(a_lag, &a, b_lag, &b));
    }
}

#[test]
fn nested_gates_agree_across_clients() {
    let mut w = World::new(NetworkModel::partial_synchrony(1, 0).unwrap());
    let leaves: Vec<_> = (0..4u64)
        .map(|i| w.add_leaf(ChainConfig::new(format!("c{i}"), 2, 4, true, true), ChainAdversary::benign(i)).unwrap())
        .collect();
    let lvl = w.add_lvl(&leaves[..3]).unwrap();
    let root = w.add_serial(lvl, leaves[3]).unwrap();
    let bound = w.bound(root);
    for (i, at) in [(1u64, 1u64), (2, 3), (3, 9)] {
        w.submit(root, Tx::with_born(i, at), at).unwrap();
    }
    let horizon = 9 + bound;
    let clients = [ParticipantId(0), ParticipantId(1), ParticipantId(2)];
    let mut last = vec![Ledger::empty(); clients.len()];
    for t in 0..=horizon {
        w.step(t);
        for (c, who) in clients.iter().enumerate() {
            let out = sanitize(&w.view(root, *who, t).ledger);
            assert!(is_prefix(&last[c], &out), "client {c} regressed at {t}");
            last[c] = out;
        }
        assert!(last.windows(2).all(|p| consistent(&p[0], &p[1])));
    }
    for out in &last {
        assert_eq!(dedup(ids(out)), ids(out));
        for tx in [1, 2, 3] {
            assert!(ids(out).contains(&tx), "tx {tx} missing from {out}");
        }
    }
}
