//! Truth tables over all `4^k` fault assignments.
//!
//! Assignment index `s | l << k`, where `s` and `l` are the safety and
//! liveness masks (bit `i` is chain `i + 1`).

use interchain_core::bits::BitVector;

/// Tables are materialized only up to this many chains.
pub const MAX_TABLE_K: usize = 10;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Table {
    k: usize,
    words: Vec<u64>,
}

impl Table {
    pub fn empty(k: usize) -> Table {
        assert!(k <= MAX_TABLE_K, "table over {k} chains");
        let bits = 1usize << (2 * k);
        Table { k, words: vec![0; bits.div_ceil(64)] }
    }

    pub fn from_fn(k: usize, f: impl Fn(&BitVector, &BitVector) -> bool) -> Table {
        let mut t = Table::empty(k);
        for idx in 0..t.len() {
            let (s, l) = t.split(idx);
            if f(&s, &l) {
                t.set(idx);
            }
        }
        t
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        1 << (2 * self.k)
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    pub fn split(&self, idx: usize) -> (BitVector, BitVector) {
        let low = (1usize << self.k) - 1;
        (BitVector::from_mask((idx & low) as u32, self.k), BitVector::from_mask((idx >> self.k) as u32, self.k))
    }

    pub fn index(&self, s: &BitVector, l: &BitVector) -> usize {
        s.mask() as usize | (l.mask() as usize) << self.k
    }

    pub fn get(&self, idx: usize) -> bool {
        self.words[idx / 64] >> (idx % 64) & 1 == 1
    }

    pub fn set(&mut self, idx: usize) {
        self.words[idx / 64] |= 1 << (idx % 64);
    }

    pub fn contains(&self, s: &BitVector, l: &BitVector) -> bool {
        self.get(self.index(s, l))
    }

    fn zip(&self, other: &Table, f: impl Fn(u64, u64) -> u64) -> Table {
        assert_eq!(self.k, other.k);
        Table { k: self.k, words: self.words.iter().zip(&other.words).map(|(a, b)| f(*a, *b)).collect() }
    }

    pub fn and(&self, other: &Table) -> Table {
        self.zip(other, |a, b| a & b)
    }

    pub fn or(&self, other: &Table) -> Table {
        self.zip(other, |a, b| a | b)
    }

    pub fn majority(a: &Table, b: &Table, c: &Table) -> Table {
        a.and(b).or(&b.and(c)).or(&a.and(c))
    }

    /// Minimal set members, assuming the table is upward closed: a member
    /// is extreme when clearing any single bit leaves the set.
    pub fn extremes(&self) -> Vec<(BitVector, BitVector)> {
        (0..self.len())
            .filter(|idx| self.get(*idx))
            .filter(|idx| (0..2 * self.k).all(|b| idx >> b & 1 == 0 || !self.get(idx & !(1 << b))))
            .map(|idx| self.split(idx))
            .collect()
    }

    pub fn is_upward_closed(&self) -> bool {
        (0..self.len()).filter(|idx| self.get(*idx)).all(|idx| (0..2 * self.k).all(|b| self.get(idx | 1 << b)))
    }
}
