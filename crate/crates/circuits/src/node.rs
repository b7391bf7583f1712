//! Composition trees over numbered underlay chains.
//!
//! Text form: `serial(1, lvl(1, 2, 3))`, `lvs(1, 2)`; a bare integer is a
//! leaf. JSON form: `{"serial": [1, {"lvl": [1, 2, 3]}]}`. Leaves are
//! 1-based and may repeat across subtrees.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use interchain_core::bits::BitVector;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum CircuitNode {
    Leaf(usize),
    Serial(Vec<Arc<CircuitNode>>),
    Lvl3([Arc<CircuitNode>; 3]),
    Lvs([Arc<CircuitNode>; 2]),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NodeError {
    #[error("leaf index must be >= 1")]
    ZeroLeaf,
    #[error("serial needs at least 2 children, got {0}")]
    SerialArity(usize),
    #[error("lvl needs exactly 3 children, got {0}")]
    LvlArity(usize),
    #[error("lvs needs exactly 2 children, got {0}")]
    LvsArity(usize),
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("malformed circuit JSON: {0}")]
    Json(String),
}

impl CircuitNode {
    pub fn leaf(i: usize) -> Arc<CircuitNode> {
        Arc::new(CircuitNode::Leaf(i))
    }

    /// Serial composition; a single child is returned unchanged.
    pub fn serial(children: Vec<Arc<CircuitNode>>) -> Result<Arc<CircuitNode>, NodeError> {
        match children.len() {
            0 => Err(NodeError::SerialArity(0)),
            1 => Ok(children.into_iter().next().expect("one child")),
            _ => Ok(Arc::new(CircuitNode::Serial(children))),
        }
    }

    pub fn lvl3(a: Arc<CircuitNode>, b: Arc<CircuitNode>, c: Arc<CircuitNode>) -> Arc<CircuitNode> {
        Arc::new(CircuitNode::Lvl3([a, b, c]))
    }

    pub fn lvs(a: Arc<CircuitNode>, b: Arc<CircuitNode>) -> Arc<CircuitNode> {
        Arc::new(CircuitNode::Lvs([a, b]))
    }

    pub fn children(&self) -> &[Arc<CircuitNode>] {
        match self {
            CircuitNode::Leaf(_) => &[],
            CircuitNode::Serial(c) => c,
            CircuitNode::Lvl3(c) => c,
            CircuitNode::Lvs(c) => c,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CircuitNode::Leaf(_) => "leaf",
            CircuitNode::Serial(_) => "serial",
            CircuitNode::Lvl3(_) => "lvl",
            CircuitNode::Lvs(_) => "lvs",
        }
    }

    pub fn validate(&self) -> Result<(), NodeError> {
        let mut err = None;
        self.visit(&mut |n| match n {
            CircuitNode::Leaf(0) => err = Some(NodeError::ZeroLeaf),
            CircuitNode::Serial(c) if c.len() < 2 => err = Some(NodeError::SerialArity(c.len())),
            _ => {}
        });
        err.map_or(Ok(()), Err)
    }

    /// Largest leaf index, which is the number of chains the tree needs.
    pub fn arity(&self) -> usize {
        self.leaves().last().copied().unwrap_or(0)
    }

    pub fn leaves(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.visit(&mut |n| {
            if let CircuitNode::Leaf(i) = n {
                out.insert(*i);
            }
        });
        out
    }

    pub fn contains_lvs(&self) -> bool {
        let mut found = false;
        self.visit(&mut |n| found |= matches!(n, CircuitNode::Lvs(_)));
        found
    }

    /// Calls `f` once per distinct node.
    fn visit(&self, f: &mut impl FnMut(&CircuitNode)) {
        fn go(n: &CircuitNode, seen: &mut HashSet<*const CircuitNode>, f: &mut impl FnMut(&CircuitNode)) {
            if seen.insert(n as *const CircuitNode) {
                f(n);
                n.children().iter().for_each(|c| go(c, seen, f));
            }
        }
        go(self, &mut HashSet::new(), f)
    }

    fn fold<T: Copy>(&self, f: &impl Fn(&CircuitNode, &[T]) -> T, memo: &mut HashMap<*const CircuitNode, T>) -> T {
        if let Some(v) = memo.get(&(self as *const CircuitNode)) {
            return *v;
        }
        let kids: Vec<T> = self.children().iter().map(|c| c.fold(f, memo)).collect();
        let v = f(self, &kids);
        memo.insert(self as *const CircuitNode, v);
        v
    }

    /// Node count of the fully expanded tree, saturating.
    pub fn size(&self) -> u64 {
        self.fold(&|_, kids: &[u64]| kids.iter().fold(1u64, |a, b| a.saturating_add(*b)), &mut HashMap::new())
    }

    pub fn depth(&self) -> usize {
        self.fold(&|_, kids: &[usize]| 1 + kids.iter().max().copied().unwrap_or(0), &mut HashMap::new())
    }

    /// Replaces leaf `i` by `subst[i - 1]`, keeping shared subtrees shared.
    pub fn substitute(self: &Arc<Self>, subst: &[Arc<CircuitNode>]) -> Arc<CircuitNode> {
        fn go(n: &Arc<CircuitNode>, subst: &[Arc<CircuitNode>], memo: &mut HashMap<*const CircuitNode, Arc<CircuitNode>>) -> Arc<CircuitNode> {
            if let Some(done) = memo.get(&Arc::as_ptr(n)) {
                return done.clone();
            }
            let out = match &**n {
                CircuitNode::Leaf(i) => subst[i - 1].clone(),
                CircuitNode::Serial(c) => Arc::new(CircuitNode::Serial(c.iter().map(|x| go(x, subst, memo)).collect())),
                CircuitNode::Lvl3([a, b, c]) => CircuitNode::lvl3(go(a, subst, memo), go(b, subst, memo), go(c, subst, memo)),
                CircuitNode::Lvs([a, b]) => CircuitNode::lvs(go(a, subst, memo), go(b, subst, memo)),
            };
            memo.insert(Arc::as_ptr(n), out.clone());
            out
        }
        go(self, subst, &mut HashMap::new())
    }

    /// Number of distinct nodes when shared subtrees are counted once.
    pub fn distinct_nodes(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_| n += 1);
        n
    }

    /// Safety and liveness of the tree when chain `i` is safe iff `s[i-1]`
    /// and live iff `l[i-1]`.
    pub fn eval(&self, s: &BitVector, l: &BitVector) -> (bool, bool) {
        match self {
            CircuitNode::Leaf(i) => (s.get(i - 1), l.get(i - 1)),
            CircuitNode::Serial(c) => {
                let r: Vec<_> = c.iter().map(|x| x.eval(s, l)).collect();
                (r.iter().any(|x| x.0), r.iter().all(|x| x.1))
            }
            CircuitNode::Lvl3(c) => {
                let r: Vec<_> = c.iter().map(|x| x.eval(s, l)).collect();
                (r.iter().all(|x| x.0), r.iter().filter(|x| x.1).count() >= 2)
            }
            CircuitNode::Lvs(c) => {
                let r: Vec<_> = c.iter().map(|x| x.eval(s, l)).collect();
                (r.iter().all(|x| x.0 && x.1), r.iter().any(|x| x.1))
            }
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            CircuitNode::Leaf(i) => Value::from(*i),
            _ => {
                let kids: Vec<Value> = self.children().iter().map(|c| c.to_json()).collect();
                let mut m = serde_json::Map::new();
                m.insert(self.kind().to_string(), Value::Array(kids));
                Value::Object(m)
            }
        }
    }

    pub fn from_json(v: &Value) -> Result<Arc<CircuitNode>, NodeError> {
        let node = match v {
            Value::Number(n) => {
                let i = n.as_u64().ok_or_else(|| NodeError::Json(format!("bad leaf {n}")))? as usize;
                Arc::new(CircuitNode::Leaf(i))
            }
            Value::Object(m) if m.len() == 1 => {
                let (kind, kids) = m.iter().next().expect("one entry");
                let Value::Array(kids) = kids else {
                    return Err(NodeError::Json(format!("children of {kind} must be an array")));
                };
                let kids = kids.iter().map(CircuitNode::from_json).collect::<Result<Vec<_>, _>>()?;
                build(kind, kids).map_err(|e| match e {
                    NodeError::Parse { msg, .. } => NodeError::Json(msg),
                    other => other,
                })?
            }
            other => return Err(NodeError::Json(format!("expected a leaf index or a one-key object, got {other}"))),
        };
        node.validate()?;
        Ok(node)
    }
}

fn build(kind: &str, kids: Vec<Arc<CircuitNode>>) -> Result<Arc<CircuitNode>, NodeError> {
    let n = kids.len();
    match kind {
        "serial" if n >= 2 => Ok(Arc::new(CircuitNode::Serial(kids))),
        "serial" => Err(NodeError::SerialArity(n)),
        "lvl" => <[_; 3]>::try_from(kids).map(|k| Arc::new(CircuitNode::Lvl3(k))).map_err(|_| NodeError::LvlArity(n)),
        "lvs" => <[_; 2]>::try_from(kids).map(|k| Arc::new(CircuitNode::Lvs(k))).map_err(|_| NodeError::LvsArity(n)),
        other => Err(NodeError::Parse { pos: 0, msg: format!("unknown gate {other:?}") }),
    }
}

impl fmt::Display for CircuitNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CircuitNode::Leaf(i) => write!(f, "{i}"),
            _ => {
                write!(f, "{}(", self.kind())?;
                for (i, c) in self.children().iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ")")
            }
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, NodeError> {
        Err(NodeError::Parse { pos: self.pos, msg: msg.into() })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn take_while(&mut self, f: impl Fn(u8) -> bool) -> &str {
        let start = self.pos;
        while self.pos < self.src.len() && f(self.src[self.pos]) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.src[start..self.pos]).expect("ascii")
    }

    fn node(&mut self) -> Result<Arc<CircuitNode>, NodeError> {
        self.skip_ws();
        match self.src.get(self.pos) {
            Some(c) if c.is_ascii_digit() => {
                let digits = self.take_while(|c| c.is_ascii_digit());
                let i: usize = digits.parse().map_err(|_| NodeError::Parse { pos: self.pos, msg: "leaf index too large".into() })?;
                if i == 0 {
                    return Err(NodeError::ZeroLeaf);
                }
                Ok(CircuitNode::leaf(i))
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let at = self.pos;
                let kind = self.take_while(|c| c.is_ascii_alphanumeric()).to_ascii_lowercase();
                self.skip_ws();
                if self.src.get(self.pos) != Some(&b'(') {
                    return self.err("expected '('");
                }
                self.pos += 1;
                let mut kids = Vec::new();
                loop {
                    kids.push(self.node()?);
                    self.skip_ws();
                    match self.src.get(self.pos) {
                        Some(b',') => self.pos += 1,
                        Some(b')') => {
                            self.pos += 1;
                            break;
                        }
                        _ => return self.err("expected ',' or ')'"),
                    }
                }
                build(&kind, kids).map_err(|e| match e {
                    NodeError::Parse { msg, .. } => NodeError::Parse { pos: at, msg },
                    other => other,
                })
            }
            Some(c) => self.err(format!("unexpected character {:?}", *c as char)),
            None => self.err("unexpected end of input"),
        }
    }
}

impl FromStr for CircuitNode {
    type Err = NodeError;

    /// Accepts the text form or, if the input starts with `{`, JSON.
    fn from_str(s: &str) -> Result<CircuitNode, NodeError> {
        let trimmed = s.trim_start();
        let node = if trimmed.starts_with('{') {
            let v: Value = serde_json::from_str(trimmed).map_err(|e| NodeError::Json(e.to_string()))?;
            CircuitNode::from_json(&v)?
        } else {
            let mut p = Parser { src: s.as_bytes(), pos: 0 };
            let n = p.node()?;
            p.skip_ws();
            if p.pos != s.len() {
                return p.err("trailing input");
            }
            n
        };
        Ok(Arc::try_unwrap(node).unwrap_or_else(|a| (*a).clone()))
    }
}

impl Serialize for CircuitNode {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_json().serialize(s)
    }
}

impl<'de> Deserialize<'de> for CircuitNode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        let n = CircuitNode::from_json(&v).map_err(serde::de::Error::custom)?;
        Ok(Arc::try_unwrap(n).unwrap_or_else(|a| (*a).clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_and_json_round_trip() {
        let t: CircuitNode = "serial(1, lvl(1,2, 3), lvs(2,3))".parse().unwrap();
        assert_eq!(t.to_string(), "serial(1, lvl(1, 2, 3), lvs(2, 3))");
        let j = serde_json::to_string(&t).unwrap();
        assert_eq!(j, r#"{"serial":[1,{"lvl":[1,2,3]},{"lvs":[2,3]}]}"#);
        let back: CircuitNode = j.parse().unwrap();
        assert_eq!(back, t);
        assert_eq!(t.arity(), 3);
        assert_eq!(t.size(), 9);
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        assert_eq!("lvl(1,2)".parse::<CircuitNode>(), Err(NodeError::LvlArity(2)));
        assert_eq!("serial(1)".parse::<CircuitNode>(), Err(NodeError::SerialArity(1)));
        assert_eq!("lvs(1,2,3)".parse::<CircuitNode>(), Err(NodeError::LvsArity(3)));
        assert_eq!("0".parse::<CircuitNode>(), Err(NodeError::ZeroLeaf));
        assert!(matches!("tree(1,2)".parse::<CircuitNode>(), Err(NodeError::Parse { .. })));
        assert!(matches!("serial(1,2".parse::<CircuitNode>(), Err(NodeError::Parse { .. })));
        assert!(matches!(r#"{"lvl":[1,2]}"#.parse::<CircuitNode>(), Err(NodeError::LvlArity(2))));
        assert!(matches!(r#"{"lvl":[1,2,3],"x":1}"#.parse::<CircuitNode>(), Err(NodeError::Json(_))));
    }

    #[test]
    fn boolean_semantics_per_gate() {
        let s: BitVector = "10".parse().unwrap();
        let l: BitVector = "11".parse().unwrap();
        let serial: CircuitNode = "serial(1,2)".parse().unwrap();
        assert_eq!(serial.eval(&s, &l), (true, true));
        let lvs: CircuitNode = "lvs(1,2)".parse().unwrap();
        assert_eq!(lvs.eval(&s, &l), (false, true));
        let lvl: CircuitNode = "lvl(1,2,3)".parse().unwrap();
        assert_eq!(lvl.eval(&"111".parse().unwrap(), &"101".parse().unwrap()), (true, true));
        assert_eq!(lvl.eval(&"110".parse().unwrap(), &"100".parse().unwrap()), (false, false));
    }
}
