//! Building composition trees that achieve a requested characterization.

use std::collections::BTreeSet;
use std::sync::Arc;

use interchain_core::bits::ind;
use itertools::Itertools;
use thiserror::Error;

use crate::charac::{exm, Characterization};
use crate::check::{check_general_psync, check_general_sync, ksl_violation, Unachievable};
use crate::node::CircuitNode;

/// Default cap on the number of chains a synthesized tree may span.
pub const DEFAULT_MAX_K: usize = 6;

/// Default cap on liveness quorums in general synthesis. The tree for `n`
/// quorums nests a `(2n-3)`-lvl, whose size grows factorially.
pub const DEFAULT_MAX_QUORUMS: usize = 6;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SynthError {
    #[error("unachievable: {0}")]
    Unachievable(#[from] Unachievable),
    #[error("k={k} exceeds the synthesis cap {cap}")]
    CapExceeded { k: usize, cap: usize },
    #[error("lemma_leave needs m >= 1 extra chains")]
    NoExtraChains,
    #[error("base tree spans {base} chains but {given} were given")]
    TooFewChains { base: usize, given: usize },
    #[error("{n} liveness quorums exceed the synthesis cap {cap}")]
    TooManyQuorums { n: usize, cap: usize },
    #[error("no liveness quorum given")]
    NoQuorum,
    #[error("quorums {0:?} and {1:?} are disjoint and no safety requirement forces a common chain")]
    DisjointQuorums(Vec<usize>, Vec<usize>),
}

#[derive(Clone, Copy, Debug)]
pub struct Synthesizer {
    pub max_k: usize,
    pub max_quorums: usize,
}

impl Default for Synthesizer {
    fn default() -> Synthesizer {
        Synthesizer { max_k: DEFAULT_MAX_K, max_quorums: DEFAULT_MAX_QUORUMS }
    }
}

fn leaves(k: usize) -> Vec<Arc<CircuitNode>> {
    (1..=k).map(CircuitNode::leaf).collect()
}

/// Serial composition of `base` instantiated on every `base.arity()`-subset
/// of `chains`, in lexicographic order. If `base` is safe with `s` of its
/// chains safe and live with `l` live, the result is safe with `s` of the
/// chains safe and live with `l + m` live, where `m` is the number of
/// extra chains.
pub fn lemma_leave(base: &Arc<CircuitNode>, chains: &[Arc<CircuitNode>]) -> Result<Arc<CircuitNode>, SynthError> {
    let k = base.arity();
    if chains.len() < k {
        return Err(SynthError::TooFewChains { base: k, given: chains.len() });
    }
    if chains.len() == k {
        return Err(SynthError::NoExtraChains);
    }
    let kids = chains.iter().cloned().combinations(k).map(|subset| base.substitute(&subset)).collect();
    Ok(CircuitNode::serial(kids).expect("at least two subsets"))
}

/// The `(2f+1)`-lvl gate over `inputs`: safe if all inputs are safe, live if
/// at least `f+1` are live. One input is passed through.
pub fn lvl_over(inputs: &[Arc<CircuitNode>]) -> Arc<CircuitNode> {
    assert!(inputs.len() % 2 == 1, "lvl over an even number of inputs");
    synthesize_lvl(inputs.len() / 2).substitute(inputs)
}

/// Tree over chains `1..=2f+1` that is safe if all are safe and live if at
/// least `f+1` are live, built from 3-lvl and serial gates only.
pub fn synthesize_lvl(f: usize) -> Arc<CircuitNode> {
    match f {
        0 => CircuitNode::leaf(1),
        1 => CircuitNode::lvl3(CircuitNode::leaf(1), CircuitNode::leaf(2), CircuitNode::leaf(3)),
        _ => {
            let inner = synthesize_lvl(f - 1);
            let outs: Vec<Arc<CircuitNode>> =
                leaves(2 * f + 1).into_iter().combinations(2 * f - 1).map(|s| inner.substitute(&s)).collect();
            debug_assert_eq!(outs.len(), f * (2 * f + 1));
            let group = 2 * f - 1;
            let mut finals: Vec<Arc<CircuitNode>> = Vec::new();
            if f % 2 == 1 {
                // f+1 groups of 2f-1, then the last output on its own.
                for chunk in outs[..(f + 1) * group].chunks(group) {
                    finals.push(inner.substitute(chunk));
                }
                finals.push(outs[(f + 1) * group].clone());
            } else {
                // f groups of 2f-1, then one group of 2f lifted by one chain.
                for chunk in outs[..f * group].chunks(group) {
                    finals.push(inner.substitute(chunk));
                }
                finals.push(lemma_leave(&inner, &outs[f * group..]).expect("2f > 2f-1"));
            }
            lvl_over(&finals)
        }
    }
}

impl Synthesizer {
    fn cap(&self, k: usize) -> Result<(), SynthError> {
        if k > self.max_k {
            return Err(SynthError::CapExceeded { k, cap: self.max_k });
        }
        Ok(())
    }

    /// Tree over `k` chains, safe if `s` are safe and live if `l` are live.
    pub fn ksl(&self, k: usize, s: usize, l: usize) -> Result<Arc<CircuitNode>, SynthError> {
        if let Some(v) = ksl_violation(k, s, l) {
            return Err(v.into());
        }
        self.cap(k)?;
        let d = k - l;
        let base = synthesize_lvl(d);
        if 2 * d + 1 == k {
            Ok(base)
        } else {
            lemma_leave(&base, &leaves(k))
        }
    }

    pub fn general_psync(&self, c: &Characterization) -> Result<Arc<CircuitNode>, SynthError> {
        check_general_psync(c)?;
        self.general(c, false)
    }

    pub fn general_sync(&self, c: &Characterization) -> Result<Arc<CircuitNode>, SynthError> {
        check_general_sync(c)?;
        self.general(c, true)
    }

    /// Induction over liveness quorums `Q_1..Q_n`: start from the serial
    /// composition of `Q_1`; each further quorum `Q` wraps the tree `P` so
    /// far as `lvl(P, serial(Q), X)`, where `X` is a `(2m-1)`-lvl over the
    /// serial compositions of `Q_i ∩ Q` for the `m` earlier quorums, plus
    /// `m-1` copies of `P`. Under synchrony each intersection serial also
    /// takes the lvs gates of chain pairs across `Q_i` and `Q`.
    fn general(&self, c: &Characterization, sync: bool) -> Result<Arc<CircuitNode>, SynthError> {
        let Characterization::General { k, liveness, .. } = c else {
            return Err(Unachievable::NotGeneral.into());
        };
        self.cap(*k)?;
        let quorums: Vec<BTreeSet<usize>> = exm(liveness).iter().map(|p| ind(&p.l)).collect();
        if quorums.len() > self.max_quorums {
            return Err(SynthError::TooManyQuorums { n: quorums.len(), cap: self.max_quorums });
        }
        let Some(first) = quorums.first() else {
            return Err(SynthError::NoQuorum);
        };
        let serial_of = |q: &BTreeSet<usize>| CircuitNode::serial(q.iter().map(|i| CircuitNode::leaf(*i)).collect());
        let mut tree = serial_of(first).map_err(|_| SynthError::NoQuorum)?;
        for (m, q) in quorums.iter().enumerate().skip(1) {
            let second = serial_of(q).map_err(|_| SynthError::NoQuorum)?;
            let mut parts = Vec::with_capacity(2 * m - 1);
            for prev in &quorums[..m] {
                let mut kids: Vec<Arc<CircuitNode>> = prev.intersection(q).map(|i| CircuitNode::leaf(*i)).collect();
                if sync {
                    let mut seen = BTreeSet::new();
                    for (a, b) in prev.iter().cartesian_product(q.iter()) {
                        if a != b && seen.insert((a.min(b), a.max(b))) {
                            kids.push(CircuitNode::lvs(CircuitNode::leaf(*a), CircuitNode::leaf(*b)));
                        }
                    }
                }
                let part = CircuitNode::serial(kids).map_err(|_| {
                    SynthError::DisjointQuorums(prev.iter().copied().collect(), q.iter().copied().collect())
                })?;
                parts.push(part);
            }
            parts.extend(std::iter::repeat_n(tree.clone(), m - 1));
            tree = CircuitNode::lvl3(tree, second, lvl_over(&parts));
        }
        Ok(tree)
    }
}

pub fn synthesize_ksl(k: usize, s: usize, l: usize) -> Result<Arc<CircuitNode>, SynthError> {
    Synthesizer::default().ksl(k, s, l)
}

pub fn synthesize_general_psync(c: &Characterization) -> Result<Arc<CircuitNode>, SynthError> {
    Synthesizer::default().general_psync(c)
}

pub fn synthesize_general_sync(c: &Characterization) -> Result<Arc<CircuitNode>, SynthError> {
    Synthesizer::default().general_sync(c)
}

#[cfg(test)]
mod tests {
    use interchain_core::simnet::Mode;

    use super::*;
    use crate::charac::Point;
    use crate::eval::predicted_properties;

    #[test]
    fn ksl_examples() {
        assert_eq!(synthesize_ksl(2, 1, 2).unwrap().to_string(), "serial(1, 2)");
        assert_eq!(synthesize_ksl(3, 3, 2).unwrap().to_string(), "lvl(1, 2, 3)");
        assert_eq!(synthesize_ksl(1, 1, 1).unwrap().to_string(), "1");
        let t = synthesize_ksl(4, 3, 3).unwrap();
        assert_eq!(t.to_string(), "serial(lvl(1, 2, 3), lvl(1, 2, 4), lvl(1, 3, 4), lvl(2, 3, 4))");
        assert_eq!(synthesize_ksl(3, 2, 2).unwrap_err().to_string(), "unachievable: s=2 < 2(k-l)+1=3");
        assert_eq!(synthesize_ksl(7, 1, 7), Err(SynthError::CapExceeded { k: 7, cap: 6 }));
    }

    #[test]
    fn lemma_leave_counts_and_rejects_zero_extra() {
        let base = synthesize_ksl(2, 1, 2).unwrap();
        let t = lemma_leave(&base, &leaves(3)).unwrap();
        assert_eq!(t.children().len(), 3);
        let got = predicted_properties(&t, Mode::PartialSynchrony).unwrap();
        assert_eq!(got.to_perm_invariant().unwrap(), Some(Characterization::ksl(3, 1, 3)));
        assert_eq!(lemma_leave(&base, &leaves(2)), Err(SynthError::NoExtraChains));
    }

    #[test]
    fn lvl_of_five_has_the_expected_shape() {
        let t = synthesize_lvl(2);
        let CircuitNode::Lvl3([a, b, c]) = &*t else { panic!("root is {}", t.kind()) };
        assert!(matches!(**a, CircuitNode::Lvl3(_)));
        assert!(matches!(**b, CircuitNode::Lvl3(_)));
        assert_eq!(c.kind(), "serial");
        assert_eq!(c.children().len(), 4);
        let got = predicted_properties(&t, Mode::PartialSynchrony).unwrap();
        assert_eq!(got.to_perm_invariant().unwrap(), Some(Characterization::ksl(5, 5, 3)));
    }

    #[test]
    fn general_psync_single_quorum_is_serial() {
        let c = Characterization::general(3, [Point::parse("100/000").unwrap()], [Point::parse("000/110").unwrap()]).unwrap();
        assert_eq!(synthesize_general_psync(&c).unwrap().to_string(), "serial(1, 2)");
    }

    #[test]
    fn general_psync_pairwise_quorums() {
        let pts = |xs: &[&str]| xs.iter().map(|x| Point::parse(x).unwrap()).collect::<Vec<_>>();
        let c = Characterization::general(3, pts(&["111/000"]), pts(&["000/110", "000/011", "000/101"])).unwrap();
        let t = synthesize_general_psync(&c).unwrap();
        let got = predicted_properties(&t, Mode::PartialSynchrony).unwrap();
        assert!(got.dominates(&c).unwrap(), "{got}");
    }

    #[test]
    fn general_sync_two_singletons_uses_lvs() {
        let pts = |xs: &[&str]| xs.iter().map(|x| Point::parse(x).unwrap()).collect::<Vec<_>>();
        let c = Characterization::general(2, pts(&["11/11"]), pts(&["00/10", "00/01"])).unwrap();
        let t = synthesize_general_sync(&c).unwrap();
        assert!(t.contains_lvs());
        let got = predicted_properties(&t, Mode::Synchrony).unwrap();
        assert!(got.dominates(&c).unwrap(), "{got}");
    }
}
