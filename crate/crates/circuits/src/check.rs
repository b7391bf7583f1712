//! Achievability checks for `(k, s, l)` tuples and general characterizations.

use std::collections::BTreeSet;

use interchain_core::bits::ind;
use thiserror::Error;

use crate::charac::{exm, Characterization, Point};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum Unachievable {
    #[error("k must be at least 1")]
    ZeroChains,
    #[error("l={l} <= floor(k/2)={half}")]
    LivenessTooLow { l: usize, half: usize },
    #[error("l={l} > k={k}")]
    LivenessAboveK { l: usize, k: usize },
    #[error("s={s} < 2(k-l)+1={need}")]
    SafetyTooLow { s: usize, need: usize },
    #[error("b={b} < k-l+1={need}")]
    JointTooLow { b: usize, need: usize },
    #[error("liveness element {0} requires underlay safety")]
    LivenessNeedsSafety(Point),
    #[error("safety element {0} requires underlay liveness, which cannot help under partial synchrony")]
    SafetyNeedsLiveness(Point),
    #[error("quorums {l1} and {l2} and safety element {s} have no common chain")]
    EmptyIntersection { l1: Point, l2: Point, s: Point },
    #[error("quorums {l1} and {l2} share no safe chain of {s} and do not both contain a safe and live chain of it")]
    SyncClause { l1: Point, l2: Point, s: Point },
    #[error("expected a general characterization")]
    NotGeneral,
}

/// Why `(k, s, l)` is unachievable under partial synchrony, if it is.
pub fn ksl_violation(k: usize, s: usize, l: usize) -> Option<Unachievable> {
    if k == 0 {
        Some(Unachievable::ZeroChains)
    } else if l <= k / 2 {
        Some(Unachievable::LivenessTooLow { l, half: k / 2 })
    } else if l > k {
        Some(Unachievable::LivenessAboveK { l, k })
    } else if s < 2 * (k - l) + 1 {
        Some(Unachievable::SafetyTooLow { s, need: 2 * (k - l) + 1 })
    } else {
        None
    }
}

pub fn achievable_ksl(k: usize, s: usize, l: usize) -> bool {
    ksl_violation(k, s, l).is_none()
}

/// Why `(k, s, l, b)` is unachievable under synchrony, with both safety
/// branches present: safe if `s` chains are safe or `b` are safe and live.
pub fn sync_violation(k: usize, s: usize, l: usize, b: usize) -> Option<Unachievable> {
    ksl_violation(k, s, l).or_else(|| (b < k - l + 1).then_some(Unachievable::JointTooLow { b, need: k - l + 1 }))
}

pub fn achievable_sync(k: usize, s: usize, l: usize, b: usize) -> bool {
    sync_violation(k, s, l, b).is_none()
}

/// Synchronous achievability when either safety branch may be absent
/// (`None` means no guarantee from that branch). Each present branch must
/// satisfy the converse on its own: the `s` branch needs `l > k/2` and
/// `s >= 2(k-l)+1`; the `b` branch needs only `b >= k-l+1`.
pub fn sync_branch_violation(k: usize, s: Option<usize>, l: usize, b: Option<usize>) -> Option<Unachievable> {
    if k == 0 {
        return Some(Unachievable::ZeroChains);
    }
    if l > k {
        return Some(Unachievable::LivenessAboveK { l, k });
    }
    if let Some(s) = s {
        if let Some(v) = ksl_violation(k, s, l) {
            return Some(v);
        }
    }
    match b {
        Some(b) if b < k - l + 1 => Some(Unachievable::JointTooLow { b, need: k - l + 1 }),
        _ => None,
    }
}

fn parts(c: &Characterization) -> Result<(BTreeSet<Point>, BTreeSet<Point>), Unachievable> {
    match c {
        Characterization::General { safety, liveness, .. } => Ok((exm(safety), exm(liveness))),
        Characterization::PermInvariant { .. } => Err(Unachievable::NotGeneral),
    }
}

/// Partial synchrony: liveness needs no safety, safety needs no liveness,
/// and every two liveness quorums meet every safety set.
pub fn check_general_psync(c: &Characterization) -> Result<(), Unachievable> {
    let (es, el) = parts(c)?;
    if let Some(p) = el.iter().find(|p| p.s.count() > 0) {
        return Err(Unachievable::LivenessNeedsSafety(*p));
    }
    if let Some(p) = es.iter().find(|p| p.l.count() > 0) {
        return Err(Unachievable::SafetyNeedsLiveness(*p));
    }
    for l1 in &el {
        for l2 in el.range(l1..) {
            let q = l1.l.and(&l2.l);
            if let Some(s) = es.iter().find(|s| q.and(&s.s).count() == 0) {
                return Err(Unachievable::EmptyIntersection { l1: *l1, l2: *l2, s: *s });
            }
        }
    }
    Ok(())
}

/// Synchrony: liveness needs no safety, and for every two liveness quorums
/// and safety element, either each quorum holds a chain the element marks
/// safe and live, or the quorums meet at a chain it marks safe.
pub fn check_general_sync(c: &Characterization) -> Result<(), Unachievable> {
    let (es, el) = parts(c)?;
    if let Some(p) = el.iter().find(|p| p.s.count() > 0) {
        return Err(Unachievable::LivenessNeedsSafety(*p));
    }
    for l1 in &el {
        for l2 in el.range(l1..) {
            for s in &es {
                let good = s.s.and(&s.l);
                let both = l1.l.and(&good).count() > 0 && l2.l.and(&good).count() > 0;
                let meet = !ind(&l1.l.and(&l2.l).and(&s.s)).is_empty();
                if !both && !meet {
                    return Err(Unachievable::SyncClause { l1: *l1, l2: *l2, s: *s });
                }
            }
        }
    }
    Ok(())
}
