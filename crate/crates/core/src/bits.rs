//! Bit vectors over the underlay chains and per-chain fault flags.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Bit vector of length at most 32. Bit `i` (0-based) is chain `i + 1`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitVector {
    mask: u32,
    len: u8,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BitsError {
    #[error("bit vector length {0} exceeds 32")]
    TooLong(usize),
    #[error("invalid bit character {0:?}")]
    BadChar(char),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

impl BitVector {
    pub fn zeros(len: usize) -> BitVector {
        assert!(len <= 32, "bit vector too long");
        BitVector { mask: 0, len: len as u8 }
    }

    pub fn ones(len: usize) -> BitVector {
        BitVector::from_mask(if len == 32 { u32::MAX } else { (1u32 << len) - 1 }, len)
    }

    pub fn from_mask(mask: u32, len: usize) -> BitVector {
        assert!(len <= 32, "bit vector too long");
        let keep = if len == 32 { u32::MAX } else { (1u32 << len) - 1 };
        BitVector { mask: mask & keep, len: len as u8 }
    }

    pub fn from_bools(bits: &[bool]) -> BitVector {
        let mask = bits.iter().enumerate().fold(0u32, |m, (i, b)| if *b { m | (1 << i) } else { m });
        BitVector::from_mask(mask, bits.len())
    }

    /// Vector with ones at the given 1-based indices.
    pub fn from_indices(len: usize, idx: &[usize]) -> BitVector {
        let mut v = BitVector::zeros(len);
        for i in idx {
            v = v.with(i - 1, true);
        }
        v
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn mask(&self) -> u32 {
        self.mask
    }

    /// 0-based bit access.
    pub fn get(&self, i: usize) -> bool {
        self.mask >> i & 1 == 1
    }

    pub fn with(self, i: usize, b: bool) -> BitVector {
        assert!(i < self.len());
        let mask = if b { self.mask | 1 << i } else { self.mask & !(1 << i) };
        BitVector { mask, ..self }
    }

    pub fn count(&self) -> usize {
        self.mask.count_ones() as usize
    }

    /// Componentwise `<=`.
    pub fn le(&self, other: &BitVector) -> bool {
        self.mask & !other.mask == 0
    }

    pub fn and(&self, other: &BitVector) -> BitVector {
        BitVector { mask: self.mask & other.mask, len: self.len }
    }

    pub fn or(&self, other: &BitVector) -> BitVector {
        BitVector { mask: self.mask | other.mask, len: self.len }
    }

    pub fn bits(&self) -> Vec<bool> {
        (0..self.len()).map(|i| self.get(i)).collect()
    }

    /// Applies a permutation: output bit `perm[i]` takes input bit `i`.
    pub fn permuted(&self, perm: &[usize]) -> BitVector {
        let mut out = BitVector::zeros(self.len());
        for (i, p) in perm.iter().enumerate() {
            if self.get(i) {
                out = out.with(*p, true);
            }
        }
        out
    }
}

/// 1-based indices of the set bits.
pub fn ind(v: &BitVector) -> BTreeSet<usize> {
    (0..v.len()).filter(|i| v.get(*i)).map(|i| i + 1).collect()
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len() {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for BitVector {
    type Err = BitsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.len() > 32 {
            return Err(BitsError::TooLong(s.len()));
        }
        let mut bits = Vec::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                other => return Err(BitsError::BadChar(other)),
            }
        }
        Ok(BitVector::from_bools(&bits))
    }
}

impl Serialize for BitVector {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for BitVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Whether one underlay chain keeps its safety and liveness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ChainFault {
    pub safe: bool,
    pub live: bool,
}

impl ChainFault {
    pub const HONEST: ChainFault = ChainFault { safe: true, live: true };
}

/// One [`ChainFault`] per underlay chain.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FaultAssignment(pub Vec<ChainFault>);

impl FaultAssignment {
    pub fn honest(k: usize) -> FaultAssignment {
        FaultAssignment(vec![ChainFault::HONEST; k])
    }

    pub fn from_vectors(s: &BitVector, l: &BitVector) -> Result<FaultAssignment, BitsError> {
        if s.len() != l.len() {
            return Err(BitsError::LengthMismatch(s.len(), l.len()));
        }
        Ok(FaultAssignment((0..s.len()).map(|i| ChainFault { safe: s.get(i), live: l.get(i) }).collect()))
    }

    /// The `index`-th of the `4^k` assignments; bit `2i` is chain `i`'s
    /// safety and bit `2i + 1` its liveness.
    pub fn nth(k: usize, index: u64) -> FaultAssignment {
        FaultAssignment(
            (0..k).map(|i| ChainFault { safe: index >> (2 * i) & 1 == 1, live: index >> (2 * i + 1) & 1 == 1 }).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn safety(&self) -> BitVector {
        BitVector::from_bools(&self.0.iter().map(|c| c.safe).collect::<Vec<_>>())
    }

    pub fn liveness(&self) -> BitVector {
        BitVector::from_bools(&self.0.iter().map(|c| c.live).collect::<Vec<_>>())
    }

    /// Compact form such as `sl,s-,-l`.
    pub fn label(&self) -> String {
        self.0
            .iter()
            .map(|c| format!("{}{}", if c.safe { 's' } else { '-' }, if c.live { 'l' } else { '-' }))
            .collect::<Vec<_>>()
            .join(",")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ind_examples() {
        let v: BitVector = "101".parse().unwrap();
        assert_eq!(ind(&v), BTreeSet::from([1, 3]));
        assert!(ind(&"000".parse().unwrap()).is_empty());
        assert_eq!(ind(&BitVector::ones(5)), (1..=5).collect());
    }

    #[test]
    fn parse_and_print() {
        let v: BitVector = "0110".parse().unwrap();
        assert_eq!(v.to_string(), "0110");
        assert_eq!(v.count(), 2);
        assert!("01x".parse::<BitVector>().is_err());
    }

    #[test]
    fn order_is_componentwise() {
        let a: BitVector = "100".parse().unwrap();
        let b: BitVector = "110".parse().unwrap();
        assert!(a.le(&b));
        assert!(!b.le(&a));
    }

    #[test]
    fn assignment_enumeration_covers_all_cells() {
        let all: std::collections::HashSet<_> = (0..16).map(|i| FaultAssignment::nth(2, i)).collect();
        assert_eq!(all.len(), 16);
        let fa = FaultAssignment::nth(2, 0b1101);
        assert_eq!(fa.label(), "s-,sl");
    }
}
