//! Composition trees over underlay chains: their predicted security
//! characterizations, achievability checks, synthesis and pareto families.

pub mod charac;
pub mod check;
pub mod eval;
pub mod node;
pub mod pareto;
pub mod synth;
pub mod table;

pub use charac::{class_rep, exm, Characterization, Point, Triple};
pub use check::{achievable_ksl, achievable_sync, check_general_psync, check_general_sync, Unachievable};
pub use eval::{predicted_properties, predicted_properties_over, EvalError};
pub use node::{CircuitNode, NodeError};
pub use pareto::pareto_set;
pub use synth::{lemma_leave, synthesize_general_psync, synthesize_general_sync, synthesize_ksl, synthesize_lvl, SynthError, Synthesizer};
