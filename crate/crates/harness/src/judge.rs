//! Safety and liveness verdicts over a completed trace.

use interchain_core::ledger::{is_prefix, Ledger, Tick, TxId};
use serde::{Deserialize, Serialize};

use crate::run::Trace;

/// One sampled client output.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Output {
    pub client: usize,
    pub t: Tick,
    pub ledger: Vec<u64>,
}

impl Output {
    fn of(client: usize, t: Tick, l: &Ledger) -> Output {
        Output { client, t, ledger: l.iter().map(|x| x.id.0).collect() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    /// Two outputs where neither is a prefix of the other.
    Conflict,
    /// A client's later output does not extend its earlier one.
    Regression,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum SafetyVerdict {
    Held,
    Violated { kind: ViolationKind, first: Output, second: Output },
}

impl SafetyVerdict {
    pub fn held(&self) -> bool {
        matches!(self, SafetyVerdict::Held)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "verdict")]
pub enum LivenessVerdict {
    /// `worst_latency` is the largest delay from `max(gst, inject)` until a
    /// client first showed a transaction; `None` if nothing was judged.
    Held { worst_latency: Option<Tick>, judged: usize, pending: usize },
    Violated { tx: u64, injected: Tick, deadline: Tick, client: usize },
}

impl LivenessVerdict {
    pub fn held(&self) -> bool {
        matches!(self, LivenessVerdict::Held { .. })
    }

    pub fn worst_latency(&self) -> Option<Tick> {
        match self {
            LivenessVerdict::Held { worst_latency, .. } => *worst_latency,
            LivenessVerdict::Violated { .. } => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub safety: SafetyVerdict,
    pub liveness: LivenessVerdict,
}

/// Every pair of sampled outputs must be consistent and every client's
/// outputs must grow. Pairwise consistency of all samples is equivalent to
/// each being a prefix of the longest, so one pass suffices.
pub fn judge_safety(trace: &Trace) -> SafetyVerdict {
    let horizon = trace.outputs.iter().map(Vec::len).max().unwrap_or(0);
    let mut longest: Option<(usize, Tick, &Ledger)> = None;
    for t in 0..horizon {
        for (c, outs) in trace.outputs.iter().enumerate() {
            let Some(x) = outs.get(t) else { continue };
            let tt = t as Tick;
            if t > 0 && !is_prefix(&outs[t - 1], x) {
                return SafetyVerdict::Violated {
                    kind: ViolationKind::Regression,
                    first: Output::of(c, tt - 1, &outs[t - 1]),
                    second: Output::of(c, tt, x),
                };
            }
            match longest {
                None => longest = Some((c, tt, x)),
                Some((_, _, m)) if is_prefix(x, m) => {}
                Some((_, _, m)) if is_prefix(m, x) => longest = Some((c, tt, x)),
                Some((mc, mt, m)) => {
                    return SafetyVerdict::Violated {
                        kind: ViolationKind::Conflict,
                        first: Output::of(mc, mt, m),
                        second: Output::of(c, tt, x),
                    }
                }
            }
        }
    }
    SafetyVerdict::Held
}

/// Every injected transaction must be in every client's output at
/// `max(gst, inject) + bound`. Deadlines past the horizon are left pending.
pub fn judge_liveness(trace: &Trace, bound: Tick) -> LivenessVerdict {
    let mut worst: Option<Tick> = None;
    let (mut judged, mut pending) = (0, 0);
    for inj in &trace.injected {
        let start = inj.at.max(trace.gst);
        let deadline = start + bound;
        let id = TxId(inj.id);
        for (c, outs) in trace.outputs.iter().enumerate() {
            let first = (start as usize..outs.len()).find(|t| outs[*t].contains(id));
            match outs.get(deadline as usize) {
                None => match first {
                    Some(t) => worst = worst.max(Some(t as Tick - start)),
                    None => pending += 1,
                },
                Some(at_deadline) if at_deadline.contains(id) => {
                    judged += 1;
                    let t = first.expect("present at the deadline") as Tick;
                    worst = worst.max(Some(t - start));
                }
                Some(_) => return LivenessVerdict::Violated { tx: inj.id, injected: inj.at, deadline, client: c },
            }
        }
    }
    LivenessVerdict::Held { worst_latency: worst, judged, pending }
}
