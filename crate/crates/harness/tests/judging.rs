use std::sync::Arc;

use interchain_circuits::{synthesize_ksl, CircuitNode};
use interchain_core::bits::{ChainFault, FaultAssignment};
use interchain_core::simnet::Mode;
use interchain_harness::scenario::StallSpec;
use interchain_harness::sweep::SweepError;
use interchain_harness::{
    judge_safety, render_table, run, run_and_judge, sweep, uncertified_serial_fork, AdversaryScript, ChainParams, LivenessVerdict,
    NetworkSpec, SafetyVerdict, Scenario, SweepConfig, TxSpec, ViolationKind,
};

fn circuit(text: &str) -> Arc<CircuitNode> {
    Arc::new(text.parse().unwrap())
}

/// `"sl,s-"`: one entry per chain, `s` safe and `l` live.
fn faults(label: &str) -> FaultAssignment {
    FaultAssignment(label.split(',').map(|c| ChainFault { safe: c.contains('s'), live: c.contains('l') }).collect())
}

fn scenario(circuit: &str, faults: FaultAssignment, horizon: u64) -> Scenario {
    Scenario {
        name: "test".into(),
        seed: 3,
        network: NetworkSpec { mode: Mode::PartialSynchrony, delta: 2, gst: 0 },
        chains: ChainParams::default(),
        circuit: circuit.into(),
        faults,
        uncertified: vec![],
        serial_without_certificates: false,
        adversary: AdversaryScript::default(),
        txs: vec![TxSpec { id: 1, at: 1, to: None }, TxSpec { id: 2, at: 4, to: None }],
        clients: 3,
        horizon,
    }
}

fn stall_forever(leaf: usize) -> StallSpec {
    StallSpec { leaf, observers: None, from: 0, until: None }
}

#[test]
fn all_faulty_at_horizon_zero_is_vacuously_safe() {
    let mut sc = scenario("serial(1, 2)", faults("--,--"), 0);
    sc.txs.clear();
    let trace = run(&sc).unwrap();
    assert!(trace.outputs.iter().all(|o| o.len() == 1 && o[0].is_empty()));
    assert_eq!(judge_safety(&trace), SafetyVerdict::Held);
}

#[test]
fn serial_of_live_chains_meets_twice_tconf() {
    let sc = scenario("serial(1, 2)", faults("sl,sl"), 40);
    let trace = run(&sc).unwrap();
    let tconf = sc.chains.tconf;
    assert_eq!(trace.bound, 2 * tconf);
    let v = run_and_judge(&sc).unwrap();
    assert!(v.safety.held());
    let LivenessVerdict::Held { worst_latency, judged, .. } = v.liveness else { panic!("{:?}", v.liveness) };
    assert_eq!(judged, 6);
    assert!(worst_latency.unwrap() <= 2 * tconf);
}

#[test]
fn lvl_with_two_live_children_is_live() {
    let mut sc = scenario("lvl(1, 2, 3)", faults("sl,sl,s-"), 80);
    sc.adversary.stalls.push(stall_forever(3));
    let trace = run(&sc).unwrap();
    assert_eq!(trace.bound, 6 * sc.chains.tconf);
    let v = run_and_judge(&sc).unwrap();
    assert!(v.safety.held());
    assert!(v.liveness.held(), "{:?}", v.liveness);
}

#[test]
fn lvl_with_one_live_child_stalls() {
    let mut sc = scenario("lvl(1, 2, 3)", faults("sl,s-,s-"), 80);
    sc.adversary.stalls.extend([stall_forever(2), stall_forever(3)]);
    let v = run_and_judge(&sc).unwrap();
    assert!(v.safety.held());
    assert!(matches!(v.liveness, LivenessVerdict::Violated { tx: 1, .. }), "{:?}", v.liveness);
}

#[test]
fn uncertified_serial_child_forks_clients_apart() {
    let o = uncertified_serial_fork(false).run().unwrap();
    let SafetyVerdict::Violated { kind, first, second } = &o.verdict.safety else { panic!("{:?}", o.verdict) };
    assert_eq!(*kind, ViolationKind::Conflict);
    assert_ne!(first.client, second.client);
    assert!(o.refutes_claim);
    assert!(uncertified_serial_fork(true).run().unwrap().verdict.safety.held());
}

#[test]
fn serial_sweep_matches_the_gate() {
    let c = circuit("serial(1, 2)");
    let m = sweep(&c, &SweepConfig::new(Mode::PartialSynchrony, 3)).unwrap();
    assert_eq!(m.cells.len(), 16);
    assert_eq!(m.contradictions, 0);
    for cell in &m.cells {
        let (safe, live) = (cell.faults.safety(), cell.faults.liveness());
        assert_eq!(cell.runs, 3 * 4);
        if safe.count() >= 1 {
            assert!(cell.safety.held(), "{}", cell.label);
        }
        if live.count() == 2 {
            assert!(cell.liveness.held(), "{}", cell.label);
            assert!(cell.worst_latency.unwrap() <= 2 * m.config.chains.tconf);
        }
    }
    let table = render_table(&m);
    assert_eq!(table.lines().filter(|l| l.starts_with(['-', 's'])).count(), 16);
}

#[test]
fn violated_cells_replay_to_the_same_witness() {
    let m = sweep(&circuit("serial(1, 2)"), &SweepConfig::new(Mode::PartialSynchrony, 2)).unwrap();
    let mut replayed = 0;
    for cell in &m.cells {
        if let Some(sc) = &cell.safety_replay {
            assert_eq!(run_and_judge(sc).unwrap().safety, cell.safety);
            let back = Scenario::parse(&sc.to_toml()).unwrap();
            assert_eq!(run_and_judge(&back).unwrap().safety, cell.safety);
            replayed += 1;
        }
        if let Some(sc) = &cell.liveness_replay {
            assert_eq!(run_and_judge(sc).unwrap().liveness, cell.liveness);
            replayed += 1;
        }
    }
    assert!(replayed > 0);
}

#[test]
fn sampled_sweep_of_synthesized_433_has_no_contradictions() {
    let c = synthesize_ksl(4, 3, 3).unwrap();
    let mut cfg = SweepConfig::new(Mode::PartialSynchrony, 3);
    cfg.gst_per_seed = true;
    cfg.sample = Some(24);
    let m = sweep(&c, &cfg).unwrap();
    assert_eq!(m.cells.len(), 24);
    assert_eq!(m.contradictions, 0, "{}", render_table(&m));
}

#[test]
fn cap_error_points_at_sampling() {
    let c = circuit("serial(1, 2, 3, 4, 5, 6)");
    let mut cfg = SweepConfig::new(Mode::Synchrony, 1);
    let err = sweep(&c, &cfg).unwrap_err();
    assert!(matches!(err, SweepError::CapExceeded { k: 6, cells: 4096, .. }));
    assert!(err.to_string().contains("sample"));
    cfg.sample = Some(4);
    cfg.scripted = false;
    assert_eq!(sweep(&c, &cfg).unwrap().cells.len(), 4);
}

#[test]
fn lvs_needs_synchrony() {
    let err = sweep(&circuit("lvs(1, 2)"), &SweepConfig::new(Mode::PartialSynchrony, 1)).unwrap_err();
    assert!(matches!(err, SweepError::LvsUnderPartialSynchrony));
}
