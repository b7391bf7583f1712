//! Text rendering of sweep matrices. JSON comes from serde directly.

use std::fmt::Write;

use crate::judge::{LivenessVerdict, SafetyVerdict};
use crate::sweep::Matrix;

fn yn(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

pub fn render_table(m: &Matrix) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "circuit {}  k={}  mode={:?}  bound={}  runs={}", m.circuit, m.k, m.mode, m.bound, m.runs);
    let width = (3 * m.k).max(5);
    let _ = writeln!(out, "{:<width$}  {:>6} {:>6}  {:<8} {:<8} {:>7} {:>5}", "cell", "p.safe", "p.live", "safety", "liveness", "latency", "runs");
    for c in &m.cells {
        let safety = match c.safety {
            SafetyVerdict::Held => "held",
            SafetyVerdict::Violated { .. } => "VIOLATED",
        };
        let liveness = match c.liveness {
            LivenessVerdict::Held { .. } => "held",
            LivenessVerdict::Violated { .. } => "VIOLATED",
        };
        let latency = c.worst_latency.map_or("-".to_string(), |l| l.to_string());
        let mark = if c.contradiction { "  <- contradicts prediction" } else { "" };
        let _ = writeln!(
            out,
            "{:<width$}  {:>6} {:>6}  {:<8} {:<8} {:>7} {:>5}{mark}",
            c.label,
            yn(c.predicted_safe),
            yn(c.predicted_live),
            safety,
            liveness,
            latency,
            c.runs
        );
    }
    let _ = writeln!(out, "{} of {} cells contradict the prediction", m.contradictions, m.cells.len());
    out
}
