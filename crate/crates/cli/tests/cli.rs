use std::process::{Command, Output};

use interchain_harness::attack_library;
use serde_json::Value;

fn interchain(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_interchain")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn body(o: &Output) -> Vec<String> {
    stdout(o).lines().filter(|l| !l.starts_with('#')).map(String::from).collect()
}

fn json(args: &[&str]) -> (Value, i32) {
    let mut all = args.to_vec();
    all.extend(["--format", "json"]);
    let o = interchain(&all);
    (serde_json::from_slice(&o.stdout).expect("json report"), o.status.code().unwrap())
}

#[test]
fn synth_332_is_one_lvl_gate() {
    let o = interchain(&["synth", "--ksl", "3,3,2"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(body(&o), ["lvl(1, 2, 3)"]);
}

#[test]
fn check_reports_unachievable_and_succeeds() {
    let o = interchain(&["check", "--ksl", "3,2,2"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(body(&o), ["unachievable: s=2 < 2(k-l)+1=3"]);
    let o = interchain(&["check", "--ksl", "3,3,2"]);
    assert_eq!(body(&o), ["achievable"]);
}

#[test]
fn check_sync_allows_lvs_point_without_s_branch() {
    assert_eq!(body(&interchain(&["check", "--ksl", "2,-,1,2", "--mode", "sync"])), ["achievable"]);
    assert_eq!(body(&interchain(&["check", "--ksl", "2,-,1,1", "--mode", "sync"])), ["unachievable: b=1 < k-l+1=2"]);
}

#[test]
fn pareto_k3_psync_has_two_members() {
    let (r, code) = json(&["pareto", "--k", "3", "--mode", "psync"]);
    assert_eq!(code, 0);
    assert_eq!(r["result"]["family"].as_array().unwrap().len(), 2);
}

#[test]
fn errors_exit_2_with_distinct_messages() {
    let cases: [(&[&str], &str); 4] = [
        (&["check", "--circuit", "lvl(1,2"], "malformed circuit"),
        (&["synth", "--ksl", "3,2,2"], "unachievable"),
        (&["sweep", "--circuit", "serial(1,2,3,4,5,6)"], "sweep cap"),
        (&["sweep", "--circuit", "lvs(1,2)", "--mode", "psync"], "synchronous mode"),
    ];
    for (args, needle) in cases {
        let o = interchain(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        let err = String::from_utf8(o.stderr).unwrap();
        assert!(err.contains(needle), "{args:?}: {err}");
    }
    assert_eq!(interchain(&["check"]).status.code(), Some(2));
    assert_eq!(interchain(&["pareto"]).status.code(), Some(2));
}

#[test]
fn report_is_versioned_and_reproducible() {
    let args = ["sweep", "--circuit", "serial(1,2)", "--seeds", "2", "--seed", "9"];
    let (a, code) = json(&args);
    assert_eq!(code, 0);
    let (b, _) = json(&args);
    assert_eq!(a, b);
    assert_eq!(a["schema"], "interchain-report/1");
    assert_eq!(a["seed"], 9);
    assert_eq!(a["config_hash"].as_str().unwrap().len(), 64);
    let (c, _) = json(&["sweep", "--circuit", "serial(1,2)", "--seeds", "2", "--seed", "10"]);
    assert_ne!(a["config_hash"], c["config_hash"]);
}

#[test]
fn sweep_contradiction_exits_1() {
    // the lvl gate overruns its derived latency bound
    let o = interchain(&["sweep", "--circuit", "lvl(1,2,3)", "--seeds", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("contradicts prediction"));
}

#[test]
fn run_replays_an_attack_scenario_file() {
    let dir = std::env::temp_dir().join(format!("interchain-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let a = attack_library().into_iter().find(|a| a.name == "uncertified-serial-fork").unwrap();
    let path = dir.join("fork.toml");
    std::fs::write(&path, a.scenario.to_toml()).unwrap();
    let (r, code) = json(&["run", "--scenario", path.to_str().unwrap()]);
    // chain 1 stays safe, so serial promises safety and the break is a mismatch
    assert_eq!(code, 1);
    assert_eq!(r["result"]["verdict"]["safety"]["verdict"], "violated");
    assert_eq!(r["result"]["predicted_safe"], true);
    let hashed = r["config"]["inputs"].as_object().unwrap();
    assert_eq!(hashed.len(), 1);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn attacks_match_expectations_and_write_out_file() {
    let dir = std::env::temp_dir().join(format!("interchain-attacks-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("attacks.json");
    let o = interchain(&["attacks", "--format", "json", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let rows = r["result"]["attacks"].as_array().unwrap();
    assert_eq!(rows.len(), 7);
    assert!(rows.iter().all(|x| x["as_expected"] == true));
    assert_eq!(interchain(&["attacks", "--name", "nope"]).status.code(), Some(2));
    std::fs::remove_dir_all(&dir).unwrap();
}
