use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use interchain_circuits::check::{ksl_violation, sync_branch_violation};
use interchain_circuits::{
    check_general_psync, check_general_sync, pareto_set, predicted_properties, synthesize_general_psync, synthesize_general_sync,
    synthesize_ksl, Characterization, CircuitNode, Triple,
};
use interchain_core::simnet::Mode;
use interchain_harness::{attack_library, render_table, run_and_judge, sweep, LivenessVerdict, SafetyVerdict, Scenario, SweepConfig};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::{ModeArg, Target, Verb};

pub const SCHEMA: &str = "interchain-report/1";

pub struct Outcome {
    pub result: Value,
    pub table: String,
    /// Some verdict contradicts what the circuit algebra predicts.
    pub mismatch: bool,
    /// Input files read, by path, with the hash of their contents.
    pub inputs: BTreeMap<String, String>,
}

impl Outcome {
    fn new(result: Value, table: String) -> Outcome {
        Outcome { result, table, mismatch: false, inputs: BTreeMap::new() }
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn read(path: &Path, inputs: &mut BTreeMap<String, String>) -> Result<String, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    inputs.insert(path.display().to_string(), sha256_hex(text.as_bytes()));
    Ok(text)
}

/// `k,s,l` or `k,s,l,b`; `-` leaves the `s` or `b` branch out.
#[derive(Clone, Copy, Debug)]
struct Tuple {
    k: usize,
    s: Option<usize>,
    l: usize,
    b: Option<usize>,
}

fn parse_tuple(text: &str) -> Result<Tuple, String> {
    let bad = || format!("malformed tuple {text:?}: expected k,s,l or k,s,l,b");
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let num = |p: &str| p.parse::<usize>().map_err(|_| bad());
    let opt = |p: &str| if p == "-" { Ok(None) } else { num(p).map(Some) };
    match parts.as_slice() {
        [k, s, l] => Ok(Tuple { k: num(k)?, s: opt(s)?, l: num(l)?, b: None }),
        [k, s, l, b] => Ok(Tuple { k: num(k)?, s: opt(s)?, l: num(l)?, b: opt(b)? }),
        _ => Err(bad()),
    }
}

impl Tuple {
    fn characterization(&self, mode: Mode) -> Result<Characterization, String> {
        match (self.s, self.b, mode) {
            (Some(s), None, _) => Ok(Characterization::ksl(self.k, s, self.l)),
            (Some(s), Some(b), Mode::Synchrony) => Ok(Characterization::ksl_sync(self.k, s, self.l, b)),
            (None, Some(b), Mode::Synchrony) => Ok(Characterization::PermInvariant {
                k: self.k,
                safety: BTreeSet::from([Triple(0, 0, b)]),
                liveness: BTreeSet::from([Triple(0, self.l, 0)]),
            }),
            (_, Some(_), Mode::PartialSynchrony) => Err("the b threshold applies only with --mode sync".into()),
            (None, None, _) => Err("tuple gives no safety threshold".into()),
        }
    }
}

fn load_charac(path: &Path, inputs: &mut BTreeMap<String, String>) -> Result<Characterization, String> {
    let text = read(path, inputs)?;
    serde_json::from_str(&text).map_err(|e| format!("malformed characterization {}: {e}", path.display()))
}

/// A `k,s,l` tuple, or else a characterization file.
fn charac_arg(text: &str, mode: Mode, inputs: &mut BTreeMap<String, String>) -> Result<Characterization, String> {
    match parse_tuple(text) {
        Ok(t) => t.characterization(mode),
        Err(_) => load_charac(Path::new(text), inputs),
    }
}

fn parse_circuit(text: &str) -> Result<Arc<CircuitNode>, String> {
    text.parse::<CircuitNode>().map(Arc::new).map_err(|e| format!("malformed circuit {text:?}: {e}"))
}

fn synth_target(target: &Target, mode: Mode, inputs: &mut BTreeMap<String, String>) -> Result<Arc<CircuitNode>, String> {
    let charac = match (&target.ksl, &target.charac) {
        (Some(t), _) => {
            let t = parse_tuple(t)?;
            if let (Some(s), None) = (t.s, t.b) {
                return synthesize_ksl(t.k, s, t.l).map_err(|e| e.to_string());
            }
            t.characterization(mode)?
        }
        (None, Some(path)) => load_charac(path, inputs)?,
        (None, None) => return Err("give --ksl or --charac".into()),
    };
    let general = charac.to_general().map_err(|e| e.to_string())?;
    match mode {
        Mode::PartialSynchrony => synthesize_general_psync(&general),
        Mode::Synchrony => synthesize_general_sync(&general),
    }
    .map_err(|e| e.to_string())
}

fn predicted(node: &Arc<CircuitNode>, mode: Mode) -> Value {
    match predicted_properties(node, mode) {
        Ok(c) => json!(c),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn synth(target: &Target, mode: Mode) -> Result<Outcome, String> {
    let mut inputs = BTreeMap::new();
    let node = synth_target(target, mode, &mut inputs)?;
    let text = node.to_string();
    let result = json!({ "circuit": text, "tree": node.to_json(), "predicted": predicted(&node, mode) });
    let mut out = Outcome::new(result, format!("{text}\n"));
    out.inputs = inputs;
    Ok(out)
}

fn check(ksl: &Option<String>, charac: &Option<std::path::PathBuf>, circuit: &Option<String>, mode: Mode) -> Result<Outcome, String> {
    let mut inputs = BTreeMap::new();
    if let Some(text) = circuit {
        let node = parse_circuit(text)?;
        let p = predicted_properties(&node, mode).map_err(|e| e.to_string())?;
        let table = format!("{node} guarantees {p}\n");
        return Ok(Outcome::new(json!({ "circuit": node.to_string(), "predicted": p }), table));
    }
    let verdict = match (ksl, charac) {
        (Some(t), _) => {
            let t = parse_tuple(t)?;
            match mode {
                Mode::PartialSynchrony => match t.s {
                    _ if t.b.is_some() => return Err("the b threshold applies only with --mode sync".into()),
                    Some(s) => ksl_violation(t.k, s, t.l),
                    None => return Err("tuple gives no safety threshold".into()),
                },
                Mode::Synchrony => sync_branch_violation(t.k, t.s, t.l, t.b),
            }
        }
        (None, Some(path)) => {
            let c = load_charac(path, &mut inputs)?.to_general().map_err(|e| e.to_string())?;
            match mode {
                Mode::PartialSynchrony => check_general_psync(&c),
                Mode::Synchrony => check_general_sync(&c),
            }
            .err()
        }
        (None, None) => return Err("give --ksl, --charac or --circuit".into()),
    };
    let (result, table) = match verdict {
        None => (json!({ "achievable": true }), "achievable\n".to_string()),
        Some(why) => (json!({ "achievable": false, "reason": why.to_string() }), format!("unachievable: {why}\n")),
    };
    let mut out = Outcome::new(result, table);
    out.inputs = inputs;
    Ok(out)
}

fn safety_line(v: &SafetyVerdict) -> String {
    match v {
        SafetyVerdict::Held => "held".into(),
        SafetyVerdict::Violated { kind, first, second } => format!(
            "violated ({kind:?}): client {} at t={} has {:?}, client {} at t={} has {:?}",
            first.client, first.t, first.ledger, second.client, second.t, second.ledger
        ),
    }
}

fn liveness_line(v: &LivenessVerdict) -> String {
    match v {
        LivenessVerdict::Held { worst_latency, judged, pending } => {
            let w = worst_latency.map_or("-".into(), |w| w.to_string());
            format!("held (worst latency {w}, {judged} judged, {pending} pending)")
        }
        LivenessVerdict::Violated { tx, injected, deadline, client } => {
            format!("violated: tx {tx} injected at t={injected} missing from client {client} at deadline t={deadline}")
        }
    }
}

fn run_scenario(path: &Path) -> Result<Outcome, String> {
    let mut inputs = BTreeMap::new();
    let text = read(path, &mut inputs)?;
    let sc = Scenario::parse(&text).map_err(|e| format!("malformed scenario {}: {e}", path.display()))?;
    let node = sc.validate().map_err(|e| e.to_string())?;
    let (safe, live) = node.eval(&sc.faults.safety(), &sc.faults.liveness());
    let v = run_and_judge(&sc).map_err(|e| e.to_string())?;
    let mismatch = (safe && !v.safety.held()) || (live && !v.liveness.held());
    let mut table = String::new();
    let _ = writeln!(table, "scenario {:?} seed {} circuit {} faults {}", sc.name, sc.seed, sc.circuit, sc.faults.label());
    let _ = writeln!(table, "safety:   {} (predicted {})", safety_line(&v.safety), if safe { "safe" } else { "no guarantee" });
    let _ = writeln!(table, "liveness: {} (predicted {})", liveness_line(&v.liveness), if live { "live" } else { "no guarantee" });
    if mismatch {
        table.push_str("verdict contradicts the prediction\n");
    }
    let result = json!({
        "scenario": sc.name, "scenario_seed": sc.seed, "circuit": sc.circuit,
        "predicted_safe": safe, "predicted_live": live, "verdict": v, "contradiction": mismatch,
    });
    let mut out = Outcome::new(result, table);
    out.mismatch = mismatch;
    out.inputs = inputs;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn sweep_verb(
    circuit: &Option<String>,
    ksl: &Option<String>,
    mode: Mode,
    seeds: u64,
    sample: Option<usize>,
    threads: Option<usize>,
    cap: usize,
    seed: u64,
) -> Result<Outcome, String> {
    let node = match (circuit, ksl) {
        (Some(text), _) => parse_circuit(text)?,
        (None, Some(t)) => {
            let target = Target { ksl: Some(t.clone()), charac: None };
            synth_target(&target, mode, &mut BTreeMap::new())?
        }
        (None, None) => return Err("give --circuit or --ksl".into()),
    };
    let mut cfg = SweepConfig::new(mode, seeds);
    cfg.base_seed = seed;
    cfg.sample = sample;
    cfg.threads = threads;
    cfg.cap = cap;
    let m = sweep(&node, &cfg).map_err(|e| format!("sweep: {e}"))?;
    let mut out = Outcome::new(json!(m), render_table(&m));
    out.mismatch = m.contradictions > 0;
    Ok(out)
}

fn pareto(k: usize, mode: Mode) -> Result<Outcome, String> {
    if k == 0 {
        return Err("k must be at least 1".into());
    }
    let family = pareto_set(k, mode);
    let table: String = family.iter().map(|c| format!("{c}\n")).collect();
    Ok(Outcome::new(json!({ "k": k, "family": family }), table))
}

fn dominates(a: &str, b: &str) -> Result<Outcome, String> {
    let mut inputs = BTreeMap::new();
    // a fourth tuple component only makes sense in synchronous mode
    let mode = |t: &str| match parse_tuple(t) {
        Ok(Tuple { b: Some(_), .. }) => Mode::Synchrony,
        _ => Mode::PartialSynchrony,
    };
    let ca = charac_arg(a, mode(a), &mut inputs)?;
    let cb = charac_arg(b, mode(b), &mut inputs)?;
    let d = ca.dominates(&cb).map_err(|e| e.to_string())?;
    let table = format!("{ca} {} {cb}\n", if d { "dominates" } else { "does not dominate" });
    let mut out = Outcome::new(json!({ "a": ca, "b": cb, "dominates": d }), table);
    out.inputs = inputs;
    Ok(out)
}

fn attacks(name: &Option<String>) -> Result<Outcome, String> {
    let lib: Vec<_> = attack_library().into_iter().filter(|a| name.as_ref().is_none_or(|n| &a.name == n)).collect();
    if lib.is_empty() {
        return Err(format!("no attack named {:?}", name.as_deref().unwrap_or("")));
    }
    let mut rows = Vec::new();
    let mut table = String::new();
    let mut mismatch = false;
    for a in &lib {
        let o = a.run().map_err(|e| format!("{}: {e}", a.name))?;
        let broke = !o.verdict.safety.held();
        // an instantiated attack must break safety, a degraded one must not
        let as_expected = broke == a.instantiated;
        mismatch |= !as_expected;
        let line = format!(
            "{:<24} safety {:<8} expected {:<8}{}",
            a.name,
            if broke { "violated" } else { "held" },
            if a.instantiated { "violated" } else { "held" },
            if as_expected { "" } else { "  <- unexpected" }
        );
        let _ = writeln!(table, "{}", line.trim_end());
        rows.push(json!({ "attack": a, "outcome": o, "as_expected": as_expected }));
    }
    let mut out = Outcome::new(json!({ "attacks": rows }), table);
    out.mismatch = mismatch;
    Ok(out)
}

pub fn execute(verb: &Verb, seed: u64) -> Result<Outcome, String> {
    let m = |m: &ModeArg| Mode::from(*m);
    match verb {
        Verb::Synth { target, mode } => synth(target, m(mode)),
        Verb::Check { ksl, charac, circuit, mode } => check(ksl, charac, circuit, m(mode)),
        Verb::Run { scenario } => run_scenario(scenario),
        Verb::Sweep { circuit, ksl, mode, seeds, sample, threads, cap } => {
            sweep_verb(circuit, ksl, m(mode), *seeds, *sample, *threads, *cap, seed)
        }
        Verb::Pareto { k, mode } => pareto(*k, m(mode)),
        Verb::Dominates { a, b } => dominates(a, b),
        Verb::Attacks { name } => attacks(name),
    }
}

fn verb_name(verb: &Verb) -> &'static str {
    match verb {
        Verb::Synth { .. } => "synth",
        Verb::Check { .. } => "check",
        Verb::Run { .. } => "run",
        Verb::Sweep { .. } => "sweep",
        Verb::Pareto { .. } => "pareto",
        Verb::Dominates { .. } => "dominates",
        Verb::Attacks { .. } => "attacks",
    }
}

/// Everything that determines the result: the parsed verb, the seed and
/// the contents of every file read.
fn config(verb: &Verb, seed: u64, out: &Outcome) -> (Value, String) {
    let config = json!({ "verb": verb, "seed": seed, "inputs": out.inputs });
    let hash = sha256_hex(config.to_string().as_bytes());
    (config, hash)
}

pub fn json_report(verb: &Verb, seed: u64, out: &Outcome) -> String {
    let (config, hash) = config(verb, seed, out);
    let report = json!({
        "schema": SCHEMA,
        "verb": verb_name(verb),
        "seed": seed,
        "config": config,
        "config_hash": hash,
        "mismatch": out.mismatch,
        "result": out.result,
    });
    format!("{}\n", serde_json::to_string_pretty(&report).expect("report serializes"))
}

pub fn table_report(verb: &Verb, seed: u64, out: &Outcome) -> String {
    let (_, hash) = config(verb, seed, out);
    format!("# {} seed={seed} config={}\n{}", verb_name(verb), &hash[..16], out.table)
}
