//! Security characterizations: which combinations of underlay safety and
//! liveness guarantee overlay safety and liveness.
//!
//! Sets are upward closed and stored by their extreme (minimal) elements.

use std::collections::BTreeSet;
use std::fmt;

use interchain_core::bits::BitVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::table::{Table, MAX_TABLE_K};

/// A fault-assignment vector: chain `i` safe iff `s[i]`, live iff `l[i]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Point {
    pub s: BitVector,
    pub l: BitVector,
}

impl Point {
    pub fn new(s: BitVector, l: BitVector) -> Point {
        Point { s, l }
    }

    /// Parses `"10/00"`.
    pub fn parse(text: &str) -> Option<Point> {
        let (s, l) = text.split_once('/')?;
        let (s, l): (BitVector, BitVector) = (s.parse().ok()?, l.parse().ok()?);
        (s.len() == l.len()).then_some(Point { s, l })
    }

    pub fn le(&self, other: &Point) -> bool {
        self.s.le(&other.s) && self.l.le(&other.l)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.s, self.l)
    }
}

/// Counts `(n_s, n_l, n_sl)`: at least `n_s` safe, `n_l` live and `n_sl`
/// both safe and live chains.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple(pub usize, pub usize, pub usize);

impl Triple {
    pub fn le(&self, o: &Triple) -> bool {
        self.0 <= o.0 && self.1 <= o.1 && self.2 <= o.2
    }

    pub fn admits(&self, (cs, cl, csl): (usize, usize, usize)) -> bool {
        cs >= self.0 && cl >= self.1 && csl >= self.2
    }

    /// Counts of the smallest assignments over `k` chains that meet the
    /// constraint, or `None` if none does. Over `k` chains, `n_s` safe and
    /// `n_l` live force `n_s + n_l - k` chains to be both.
    pub fn normalized(&self, k: usize) -> Option<Triple> {
        let both = self.2.max((self.0 + self.1).saturating_sub(k));
        let t = Triple(self.0.max(both), self.1.max(both), both);
        (t.0 <= k && t.1 <= k).then_some(t)
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.0, self.1, self.2)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Characterization {
    General { k: usize, safety: BTreeSet<Point>, liveness: BTreeSet<Point> },
    PermInvariant { k: usize, safety: BTreeSet<Triple>, liveness: BTreeSet<Triple> },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CharError {
    #[error("characterizations are over {0} and {1} chains")]
    KMismatch(usize, usize),
    #[error("cannot compare a general characterization with a permutation invariant one")]
    ModeMismatch,
    #[error("vector {0} does not have length {1}")]
    BadLength(Point, usize),
    #[error("{0} chains exceed the table limit {MAX_TABLE_K}")]
    TooLarge(usize),
}

/// Minimal elements under componentwise `<`.
pub fn exm(points: &BTreeSet<Point>) -> BTreeSet<Point> {
    points.iter().filter(|p| !points.iter().any(|q| q != *p && q.le(p))).copied().collect()
}

pub fn exm_triples(ts: &BTreeSet<Triple>) -> BTreeSet<Triple> {
    ts.iter().filter(|p| !ts.iter().any(|q| q != *p && q.le(p))).copied().collect()
}

/// `(c_s, c_l, c_sl)` of a vector.
pub fn class_rep(p: &Point) -> (usize, usize, usize) {
    (p.s.count(), p.l.count(), p.s.and(&p.l).count())
}

impl Characterization {
    /// Safe if at least `s` chains are safe, live if at least `l` are live.
    pub fn ksl(k: usize, s: usize, l: usize) -> Characterization {
        Characterization::PermInvariant {
            k,
            safety: BTreeSet::from([Triple(s, 0, 0)]),
            liveness: BTreeSet::from([Triple(0, l, 0)]),
        }
    }

    /// As [`Characterization::ksl`], and also safe if at least `b` chains
    /// are both safe and live.
    pub fn ksl_sync(k: usize, s: usize, l: usize, b: usize) -> Characterization {
        Characterization::PermInvariant {
            k,
            safety: BTreeSet::from([Triple(s, 0, 0), Triple(0, 0, b)]),
            liveness: BTreeSet::from([Triple(0, l, 0)]),
        }
    }

    pub fn general(k: usize, safety: impl IntoIterator<Item = Point>, liveness: impl IntoIterator<Item = Point>) -> Result<Characterization, CharError> {
        let safety: BTreeSet<Point> = safety.into_iter().collect();
        let liveness: BTreeSet<Point> = liveness.into_iter().collect();
        for p in safety.iter().chain(&liveness) {
            if p.s.len() != k || p.l.len() != k {
                return Err(CharError::BadLength(*p, k));
            }
        }
        Ok(Characterization::General { k, safety: exm(&safety), liveness: exm(&liveness) })
    }

    pub fn k(&self) -> usize {
        match self {
            Characterization::General { k, .. } | Characterization::PermInvariant { k, .. } => *k,
        }
    }

    /// Membership tables of the safety and liveness sets.
    pub fn tables(&self) -> Result<(Table, Table), CharError> {
        let k = self.k();
        if k > MAX_TABLE_K {
            return Err(CharError::TooLarge(k));
        }
        Ok(match self {
            Characterization::General { safety, liveness, .. } => {
                let of = |set: &BTreeSet<Point>| Table::from_fn(k, |s, l| set.iter().any(|p| p.s.le(s) && p.l.le(l)));
                (of(safety), of(liveness))
            }
            Characterization::PermInvariant { safety, liveness, .. } => {
                let of = |set: &BTreeSet<Triple>| {
                    Table::from_fn(k, |s, l| set.iter().any(|t| t.admits(class_rep(&Point::new(*s, *l)))))
                };
                (of(safety), of(liveness))
            }
        })
    }

    pub fn from_tables(safety: &Table, liveness: &Table) -> Characterization {
        let pts = |t: &Table| t.extremes().into_iter().map(|(s, l)| Point::new(s, l)).collect();
        Characterization::General { k: safety.k(), safety: pts(safety), liveness: pts(liveness) }
    }

    /// Extreme-element form.
    pub fn to_general(&self) -> Result<Characterization, CharError> {
        match self {
            Characterization::General { .. } => Ok(self.clone()),
            Characterization::PermInvariant { .. } => {
                let (s, l) = self.tables()?;
                Ok(Characterization::from_tables(&s, &l))
            }
        }
    }

    /// Triple form, if both sets are permutation invariant and described
    /// exactly by their minimal count triples.
    pub fn to_perm_invariant(&self) -> Result<Option<Characterization>, CharError> {
        let Characterization::General { k, .. } = self else {
            return Ok(Some(self.clone()));
        };
        let (ts, tl) = self.tables()?;
        let triples = |t: &Table| -> Option<BTreeSet<Triple>> {
            let mut member = std::collections::BTreeMap::new();
            for idx in 0..t.len() {
                let (s, l) = t.split(idx);
                let c = class_rep(&Point::new(s, l));
                if *member.entry(c).or_insert(t.get(idx)) != t.get(idx) {
                    return None;
                }
            }
            let inside: BTreeSet<Triple> = member.iter().filter(|(_, m)| **m).map(|(c, _)| Triple(c.0, c.1, c.2)).collect();
            Some(exm_triples(&inside))
        };
        let (Some(ps), Some(pl)) = (triples(&ts), triples(&tl)) else {
            return Ok(None);
        };
        let candidate = Characterization::PermInvariant { k: *k, safety: ps, liveness: pl };
        let (cs, cl) = candidate.tables()?;
        Ok((cs == ts && cl == tl).then_some(candidate))
    }

    /// Whether `self` guarantees at least what `other` does: each extreme
    /// of `other` lies above some extreme of `self`, for safety and for
    /// liveness.
    pub fn dominates(&self, other: &Characterization) -> Result<bool, CharError> {
        if self.k() != other.k() {
            return Err(CharError::KMismatch(self.k(), other.k()));
        }
        let k = self.k();
        match (self, other) {
            (
                Characterization::General { safety: ps, liveness: pl, .. },
                Characterization::General { safety: qs, liveness: ql, .. },
            ) => {
                let covers = |p: &BTreeSet<Point>, q: &BTreeSet<Point>| q.iter().all(|y| p.iter().any(|x| x.le(y)));
                Ok(covers(ps, qs) && covers(pl, ql))
            }
            (
                Characterization::PermInvariant { safety: ps, liveness: pl, .. },
                Characterization::PermInvariant { safety: qs, liveness: ql, .. },
            ) => {
                // Comparing against the counts of the smallest assignments
                // meeting each triple of `other` decides set inclusion.
                let covers = |p: &BTreeSet<Triple>, q: &BTreeSet<Triple>| {
                    q.iter().filter_map(|t| t.normalized(k)).all(|y| p.iter().any(|x| x.le(&y)))
                };
                Ok(covers(ps, qs) && covers(pl, ql))
            }
            _ => Err(CharError::ModeMismatch),
        }
    }

    /// Canonical extreme sets, for comparing characterizations given in
    /// different forms.
    pub fn canonical(&self) -> Result<(BTreeSet<Point>, BTreeSet<Point>), CharError> {
        match self.to_general()? {
            Characterization::General { safety, liveness, .. } => Ok((safety, liveness)),
            Characterization::PermInvariant { .. } => unreachable!("to_general returns general form"),
        }
    }
}

impl fmt::Display for Characterization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn list<T: fmt::Display>(xs: &BTreeSet<T>) -> String {
            xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
        }
        match self {
            Characterization::General { k, safety, liveness } => {
                write!(f, "k={k} ES={{{}}} EL={{{}}}", list(safety), list(liveness))
            }
            Characterization::PermInvariant { k, safety, liveness } => {
                write!(f, "k={k} PS={{{}}} PL={{{}}}", list(safety), list(liveness))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(s: &str) -> Point {
        Point::parse(s).unwrap()
    }

    #[test]
    fn exm_drops_dominated_points() {
        let set = BTreeSet::from([pt("10/00"), pt("11/00")]);
        assert_eq!(exm(&set), BTreeSet::from([pt("10/00")]));
    }

    #[test]
    fn class_rep_counts() {
        assert_eq!(class_rep(&pt("110/011")), (2, 2, 1));
    }

    #[test]
    fn exm_regenerates_its_closure() {
        let c = Characterization::ksl(4, 3, 3);
        let g = c.to_general().unwrap();
        let (ts, tl) = c.tables().unwrap();
        let (gs, gl) = g.tables().unwrap();
        assert_eq!((ts, tl), (gs, gl));
        assert_eq!(g.to_perm_invariant().unwrap(), Some(c));
    }

    #[test]
    fn dominance_examples() {
        let p = Characterization::ksl(3, 1, 3);
        let q = Characterization::ksl(3, 3, 3);
        assert!(p.dominates(&q).unwrap());
        assert!(!q.dominates(&p).unwrap());
        assert!(p.dominates(&p).unwrap());
        let r = Characterization::ksl(3, 3, 2);
        assert!(!p.dominates(&r).unwrap() && !r.dominates(&p).unwrap());
        assert_eq!(p.dominates(&p.to_general().unwrap()), Err(CharError::ModeMismatch));
        assert_eq!(p.dominates(&Characterization::ksl(2, 1, 2)), Err(CharError::KMismatch(3, 2)));
    }

    #[test]
    fn unnormalized_triples_compare_by_the_sets_they_describe() {
        let both = Characterization::PermInvariant { k: 2, safety: BTreeSet::from([Triple(1, 1, 0)]), liveness: BTreeSet::new() };
        let joint = Characterization::PermInvariant { k: 2, safety: BTreeSet::from([Triple(0, 0, 1)]), liveness: BTreeSet::new() };
        assert!(both.dominates(&joint).unwrap());
        assert!(!joint.dominates(&both).unwrap());
    }
}
