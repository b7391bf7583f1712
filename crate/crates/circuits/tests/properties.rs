use std::collections::BTreeSet;
use std::sync::Arc;

use interchain_circuits::charac::{exm, Characterization, Point, Triple};
use interchain_circuits::check::{achievable_ksl, check_general_psync, check_general_sync};
use interchain_circuits::synth::{synthesize_general_psync, synthesize_general_sync, synthesize_ksl, synthesize_lvl};
use interchain_circuits::{pareto_set, predicted_properties_over, CircuitNode};
use interchain_core::bits::BitVector;
use interchain_core::simnet::Mode;
use proptest::prelude::*;

/// Brute force: evaluate the tree on every assignment, keep the minimal
/// true points by pairwise comparison.
fn brute_force(node: &CircuitNode, k: usize) -> Characterization {
    let mut safe = BTreeSet::new();
    let mut live = BTreeSet::new();
    for sm in 0..1u32 << k {
        for lm in 0..1u32 << k {
            let (s, l) = (BitVector::from_mask(sm, k), BitVector::from_mask(lm, k));
            let (a, b) = node.eval(&s, &l);
            if a {
                safe.insert(Point::new(s, l));
            }
            if b {
                live.insert(Point::new(s, l));
            }
        }
    }
    Characterization::General { k, safety: exm(&safe), liveness: exm(&live) }
}

fn arb_tree(k: usize, with_lvs: bool) -> impl Strategy<Value = Arc<CircuitNode>> {
    let leaf = (1..=k).prop_map(CircuitNode::leaf);
    leaf.prop_recursive(4, 24, 4, move |inner| {
        let serial = prop::collection::vec(inner.clone(), 2..4).prop_map(|c| CircuitNode::serial(c).unwrap());
        let lvl = (inner.clone(), inner.clone(), inner.clone()).prop_map(|(a, b, c)| CircuitNode::lvl3(a, b, c));
        let lvs = (inner.clone(), inner).prop_map(|(a, b)| CircuitNode::lvs(a, b));
        if with_lvs {
            prop_oneof![serial, lvl, lvs].boxed()
        } else {
            prop_oneof![serial, lvl].boxed()
        }
    })
}

fn arb_sized_tree() -> impl Strategy<Value = (usize, Arc<CircuitNode>)> {
    (1usize..=5).prop_flat_map(|k| (Just(k), arb_tree(k, true)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn algebra_matches_brute_force((k, tree) in arb_sized_tree()) {
        let got = predicted_properties_over(&tree, k, Mode::Synchrony).unwrap();
        prop_assert_eq!(got, brute_force(&tree, k));
    }

    #[test]
    fn predicted_sets_are_upward_closed((k, tree) in arb_sized_tree()) {
        let got = predicted_properties_over(&tree, k, Mode::Synchrony).unwrap();
        let (s, l) = got.tables().unwrap();
        prop_assert!(s.is_upward_closed() && l.is_upward_closed());
    }

    #[test]
    fn text_form_round_trips((_k, tree) in arb_sized_tree()) {
        let back: CircuitNode = tree.to_string().parse().unwrap();
        prop_assert_eq!(&back, &*tree);
    }

    #[test]
    fn dominance_is_a_partial_order(
        (k, a) in arb_sized_tree(),
        b in any::<prop::sample::Index>(),
        c in any::<prop::sample::Index>(),
    ) {
        // Three random trees over the same chains.
        let pool: Vec<Arc<CircuitNode>> = (1..=k).map(CircuitNode::leaf).collect();
        let b = CircuitNode::serial(vec![a.clone(), pool[b.index(k)].clone()]).unwrap();
        let c = CircuitNode::lvl3(a.clone(), b.clone(), pool[c.index(k)].clone());
        let [pa, pb, pc] = [&a, &b, &c].map(|t| predicted_properties_over(t, k, Mode::Synchrony).unwrap());
        prop_assert!(pa.dominates(&pa).unwrap());
        if pa.dominates(&pb).unwrap() && pb.dominates(&pc).unwrap() {
            prop_assert!(pa.dominates(&pc).unwrap());
        }
        if pa.dominates(&pb).unwrap() && pb.dominates(&pa).unwrap() {
            prop_assert_eq!(pa.canonical().unwrap(), pb.canonical().unwrap());
        }
    }

    #[test]
    fn perm_dominance_agrees_with_set_inclusion(
        k in 1usize..=4,
        ps in prop::collection::btree_set((0usize..4, 0usize..4, 0usize..4), 0..3),
        qs in prop::collection::btree_set((0usize..4, 0usize..4, 0usize..4), 0..3),
    ) {
        let mk = |xs: &BTreeSet<(usize, usize, usize)>| Characterization::PermInvariant {
            k,
            safety: xs.iter().map(|t| Triple(t.0, t.1, t.2)).collect(),
            liveness: BTreeSet::new(),
        };
        let (p, q) = (mk(&ps), mk(&qs));
        let by_triples = p.dominates(&q).unwrap();
        let (sp, _) = p.tables().unwrap();
        let (sq, _) = q.tables().unwrap();
        let by_sets = (0..sq.len()).all(|i| !sq.get(i) || sp.get(i));
        prop_assert_eq!(by_triples, by_sets);
    }

    #[test]
    fn general_psync_synthesis_is_sound(
        k in 2usize..=4,
        quorums in prop::collection::btree_set(1u32..16, 1..4),
        safety in prop::collection::btree_set(1u32..16, 1..3),
    ) {
        let full = (1u32 << k) - 1;
        let zero = BitVector::zeros(k);
        let el: Vec<Point> = quorums.iter().map(|m| Point::new(zero, BitVector::from_mask(m & full, k))).filter(|p| p.l.count() > 0).collect();
        let es: Vec<Point> = safety.iter().map(|m| Point::new(BitVector::from_mask(m & full, k), zero)).filter(|p| p.s.count() > 0).collect();
        prop_assume!(!el.is_empty() && !es.is_empty());
        let c = Characterization::general(k, es, el).unwrap();
        match check_general_psync(&c) {
            Ok(()) => {
                let tree = synthesize_general_psync(&c).unwrap();
                let got = predicted_properties_over(&tree, k, Mode::PartialSynchrony).unwrap();
                prop_assert!(got.dominates(&c).unwrap(), "{} from {}", got, c);
            }
            Err(e) => prop_assert!(synthesize_general_psync(&c).is_err(), "{}", e),
        }
    }

    #[test]
    fn general_sync_synthesis_is_sound(
        k in 2usize..=4,
        quorums in prop::collection::btree_set(1u32..16, 1..4),
        safety in prop::collection::btree_set((1u32..16, 0u32..16), 1..3),
    ) {
        let full = (1u32 << k) - 1;
        let zero = BitVector::zeros(k);
        let el: Vec<Point> = quorums.iter().map(|m| Point::new(zero, BitVector::from_mask(m & full, k))).filter(|p| p.l.count() > 0).collect();
        let es: Vec<Point> = safety
            .iter()
            .map(|(s, l)| Point::new(BitVector::from_mask(s & full, k), BitVector::from_mask(l & full, k)))
            .collect();
        prop_assume!(!el.is_empty());
        let c = Characterization::general(k, es, el).unwrap();
        if check_general_sync(&c).is_ok() {
            let tree = synthesize_general_sync(&c).unwrap();
            let got = predicted_properties_over(&tree, k, Mode::Synchrony).unwrap();
            prop_assert!(got.dominates(&c).unwrap(), "{} from {}", got, c);
        }
        if check_general_psync(&c).is_ok() {
            prop_assert!(check_general_sync(&c).is_ok());
        }
    }
}

#[test]
fn every_achievable_ksl_tree_meets_its_tuple() {
    for k in 1..=6 {
        for l in 0..=k + 1 {
            for s in 0..=k + 1 {
                if !achievable_ksl(k, s, l) {
                    assert!(synthesize_ksl(k, s, l).is_err());
                    continue;
                }
                let tree = synthesize_ksl(k, s, l).unwrap();
                let got = predicted_properties_over(&tree, k, Mode::PartialSynchrony).unwrap();
                let want = Characterization::ksl(k, s, l);
                assert!(got.to_general().unwrap().dominates(&want.to_general().unwrap()).unwrap(), "({k},{s},{l}): {got}");
            }
        }
    }
}

#[test]
fn lvl_recursion_hits_the_boundary_point() {
    for f in 1..=3 {
        let n = 2 * f + 1;
        let tree = synthesize_lvl(f);
        assert_eq!(tree.arity(), n);
        let got = predicted_properties_over(&tree, n, Mode::PartialSynchrony).unwrap();
        assert_eq!(got.to_perm_invariant().unwrap(), Some(Characterization::ksl(n, n, f + 1)), "f={f}");
    }
}

#[test]
fn synthesized_pareto_members_meet_their_characterization() {
    for k in 2..=4 {
        for mode in [Mode::PartialSynchrony, Mode::Synchrony] {
            for member in pareto_set(k, mode) {
                let general = member.to_general().unwrap();
                let tree = match mode {
                    Mode::PartialSynchrony => synthesize_general_psync(&general).unwrap(),
                    Mode::Synchrony => synthesize_general_sync(&general).unwrap(),
                };
                let got = predicted_properties_over(&tree, k, mode).unwrap();
                assert!(got.dominates(&general).unwrap(), "k={k} {member}: {got}");
            }
        }
    }
}

#[test]
fn pareto_members_do_not_dominate_each_other() {
    for k in 2..=5 {
        for mode in [Mode::PartialSynchrony, Mode::Synchrony] {
            let set = pareto_set(k, mode);
            for (i, a) in set.iter().enumerate() {
                for (j, b) in set.iter().enumerate() {
                    if i != j {
                        assert!(!a.dominates(b).unwrap(), "k={k} {a} vs {b}");
                    }
                }
            }
        }
    }
}

#[test]
fn triple_violation_is_reported() {
    let pts = |xs: &[&str]| xs.iter().map(|x| Point::parse(x).unwrap()).collect::<Vec<_>>();
    let c = Characterization::general(3, pts(&["100/000"]), pts(&["000/110", "000/011"])).unwrap();
    let err = synthesize_general_psync(&c).unwrap_err();
    assert!(err.to_string().contains("no common chain"), "{err}");
}
