//! Deterministic 64-bit content digests and seeded mixing.
//!
//! Not collision resistant against a searching adversary; the simulator
//! never searches for collisions.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Digest(pub u64);

impl Digest {
    pub const ZERO: Digest = Digest(0);

    /// Digest of this value followed by `word`.
    pub fn chain(self, word: u64) -> Digest {
        Digest(mix(self.0 ^ 0x9e37_79b9_7f4a_7c15, word))
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{:016x}", self.0)
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

/// splitmix64 finalizer
fn fmix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes two words into one.
pub fn mix(a: u64, b: u64) -> u64 {
    fmix(fmix(a.wrapping_add(0x9e37_79b9_7f4a_7c15)) ^ b.rotate_left(17) ^ b)
}

/// Mixes a sequence of words, used as a stateless keyed random source.
pub fn mix_all(parts: &[u64]) -> u64 {
    parts.iter().fold(0x243f_6a88_85a3_08d3, |acc, p| mix(acc, *p))
}

/// Uniform value in `[0, n)` drawn from a mixed key. `n` must be positive.
pub fn pick(key: u64, n: u64) -> u64 {
    debug_assert!(n > 0);
    ((key as u128 * n as u128) >> 64) as u64
}

/// Streaming hasher over words.
pub struct Hasher64(u64);

impl Hasher64 {
    pub fn new() -> Hasher64 {
        Hasher64(0x243f_6a88_85a3_08d3)
    }

    pub fn write_u64(&mut self, w: u64) {
        self.0 = mix(self.0, w);
    }

    pub fn write_str(&mut self, s: &str) {
        for chunk in s.as_bytes().chunks(8) {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            self.write_u64(u64::from_le_bytes(buf));
        }
        self.write_u64(s.len() as u64);
    }

    pub fn finish(&self) -> Digest {
        Digest(fmix(self.0))
    }
}

impl Default for Hasher64 {
    fn default() -> Self {
        Hasher64::new()
    }
}
