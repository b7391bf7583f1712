//! Predicted characterization of a composition tree.

use std::collections::HashMap;
use std::sync::Arc;

use interchain_core::simnet::Mode;
use thiserror::Error;

use crate::charac::Characterization;
use crate::node::{CircuitNode, NodeError};
use crate::table::{Table, MAX_TABLE_K};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("lvs gates are only sound under synchrony")]
    LvsUnderPartialSynchrony,
    #[error("tree uses chain {used} but only {k} chains were given")]
    LeafOutOfRange { used: usize, k: usize },
    #[error("{0} chains exceed the evaluation limit {MAX_TABLE_K}")]
    TooLarge(usize),
    #[error(transparent)]
    Node(#[from] NodeError),
}

/// Safety and liveness tables of `node` over `k` chains.
pub fn tables(node: &Arc<CircuitNode>, k: usize) -> Result<(Table, Table), EvalError> {
    node.validate()?;
    if k > MAX_TABLE_K {
        return Err(EvalError::TooLarge(k));
    }
    if node.arity() > k {
        return Err(EvalError::LeafOutOfRange { used: node.arity(), k });
    }
    let mut memo = HashMap::new();
    Ok(tables_memo(node, k, &mut memo))
}

type Memo = HashMap<*const CircuitNode, (Table, Table)>;

// Synthesized trees share subtrees, so results are cached per node.
fn tables_memo(node: &Arc<CircuitNode>, k: usize, memo: &mut Memo) -> (Table, Table) {
    let key = Arc::as_ptr(node);
    if let Some(t) = memo.get(&key) {
        return t.clone();
    }
    let out = match &**node {
        CircuitNode::Leaf(i) => {
            let i = i - 1;
            (Table::from_fn(k, |s, _| s.get(i)), Table::from_fn(k, |_, l| l.get(i)))
        }
        CircuitNode::Serial(c) => {
            let kids: Vec<_> = c.iter().map(|x| tables_memo(x, k, memo)).collect();
            let (first, rest) = kids.split_first().expect("validated");
            rest.iter().fold(first.clone(), |(s, l), (cs, cl)| (s.or(cs), l.and(cl)))
        }
        CircuitNode::Lvl3([a, b, c]) => {
            let (a, b, c) = (tables_memo(a, k, memo), tables_memo(b, k, memo), tables_memo(c, k, memo));
            (a.0.and(&b.0).and(&c.0), Table::majority(&a.1, &b.1, &c.1))
        }
        CircuitNode::Lvs([a, b]) => {
            let (a, b) = (tables_memo(a, k, memo), tables_memo(b, k, memo));
            (a.0.and(&a.1).and(&b.0.and(&b.1)), a.1.or(&b.1))
        }
    };
    memo.insert(key, out.clone());
    out
}

/// Extreme safety and liveness vectors of `node` over its own chains.
pub fn predicted_properties(node: &Arc<CircuitNode>, mode: Mode) -> Result<Characterization, EvalError> {
    predicted_properties_over(node, node.arity(), mode)
}

/// As [`predicted_properties`], over `k` chains (some may be unused).
pub fn predicted_properties_over(node: &Arc<CircuitNode>, k: usize, mode: Mode) -> Result<Characterization, EvalError> {
    if mode == Mode::PartialSynchrony && node.contains_lvs() {
        return Err(EvalError::LvsUnderPartialSynchrony);
    }
    let (s, l) = tables(node, k)?;
    Ok(Characterization::from_tables(&s, &l))
}
