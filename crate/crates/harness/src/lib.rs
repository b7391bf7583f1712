//! Scenario runner, verdict judges, fault sweeps and scripted attacks.

pub mod attacks;
pub mod build;
pub mod judge;
pub mod report;
pub mod run;
pub mod scenario;
pub mod sweep;

pub use attacks::{attack_library, naive_parallel, sync_converse, three_world, uncertified_serial_fork, Attack, AttackError, AttackOutcome};
pub use build::{build, random_script, Built};
pub use judge::{judge_liveness, judge_safety, LivenessVerdict, Output, SafetyVerdict, Verdict, ViolationKind};
pub use report::render_table;
pub use run::{run, run_and_judge, Injected, Trace};
pub use scenario::{client_id, AdversaryScript, ChainParams, NetworkSpec, ObserverRef, Scenario, ScenarioError, TxSpec};
pub use sweep::{sweep, Cell, Matrix, SweepConfig, SweepError};
