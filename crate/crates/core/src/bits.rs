//! Packed bit vectors.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

/// An ordered, fixed-width vector of bits, packed 64 to a word.
///
/// Bit `i` lives in word `i / 64` at position `i % 64`. Bits beyond `len`
/// in the last word are always zero, so derived equality is bit equality.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct BitVector {
    words: Vec<u64>,
    len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BitParseError {
    #[error("invalid character {found:?} at position {position}; expected '0' or '1'")]
    InvalidChar { position: usize, found: char },
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; len.div_ceil(64)],
            len,
        }
    }

    pub fn ones(len: usize) -> Self {
        let mut v = Self {
            words: vec![u64::MAX; len.div_ceil(64)],
            len,
        };
        v.clear_tail();
        v
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            v.set(i, b);
        }
        v
    }

    /// Low `len` bits of `value`, bit 0 first.
    pub fn from_u64(value: u64, len: usize) -> Self {
        let mut v = Self::zeros(len);
        for i in 0..len.min(64) {
            v.set(i, (value >> i) & 1 == 1);
        }
        v
    }

    /// Parses a string of `'0'`/`'1'` characters, leftmost character first.
    pub fn parse01(s: &str) -> Result<Self, BitParseError> {
        let mut bits = Vec::with_capacity(s.len());
        for (position, c) in s.chars().enumerate() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                found => return Err(BitParseError::InvalidChar { position, found }),
            }
        }
        Ok(Self::from_bools(&bits))
    }

    pub fn random(rng: &mut Rng, len: usize) -> Self {
        let mut v = Self {
            words: (0..len.div_ceil(64)).map(|_| rng.gen::<u64>()).collect(),
            len,
        };
        v.clear_tail();
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let mask = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn flip(&mut self, i: usize) {
        let b = self.get(i);
        self.set(i, !b);
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn to_bools(&self) -> Vec<bool> {
        self.iter().collect()
    }

    /// Bits as 0.0 / 1.0.
    pub fn to_f64(&self) -> Vec<f64> {
        self.iter().map(|b| if b { 1.0 } else { 0.0 }).collect()
    }

    /// Thresholds real values at 0.5 (values ≥ 0.5 become 1).
    pub fn threshold(values: &[f64]) -> Self {
        let mut v = Self::zeros(values.len());
        for (i, &x) in values.iter().enumerate() {
            v.set(i, x >= 0.5);
        }
        v
    }

    /// Concatenation `self ∥ other`.
    pub fn concat(&self, other: &BitVector) -> Self {
        let mut v = Self::zeros(self.len + other.len);
        for (i, b) in self.iter().chain(other.iter()).enumerate() {
            v.set(i, b);
        }
        v
    }

    pub fn slice(&self, start: usize, end: usize) -> Self {
        let mut v = Self::zeros(end - start);
        for i in start..end {
            v.set(i - start, self.get(i));
        }
        v
    }

    /// Number of positions where the two vectors agree.
    pub fn agreement(&self, other: &BitVector) -> usize {
        assert_eq!(self.len, other.len);
        let diff: usize = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum();
        self.len - diff
    }

    pub fn to_string01(&self) -> String {
        self.iter().map(|b| if b { '1' } else { '0' }).collect()
    }

    fn clear_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector({self})")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_print() {
        let v = BitVector::parse01("10110").unwrap();
        assert_eq!(v.len(), 5);
        assert!(v.get(0) && !v.get(1) && v.get(2));
        assert_eq!(v.to_string01(), "10110");
        assert_eq!(
            BitVector::parse01("10x"),
            Err(BitParseError::InvalidChar { position: 2, found: 'x' })
        );
    }

    #[test]
    fn tail_bits_stay_clear() {
        let a = BitVector::ones(70);
        assert_eq!(a.count_ones(), 70);
        let mut rng = crate::rng::seeded(3);
        let r = BitVector::random(&mut rng, 65);
        assert!(r.count_ones() <= 65);
        assert_eq!(BitVector::from_bools(&r.to_bools()), r);
    }

    #[test]
    fn concat_and_slice() {
        let a = BitVector::parse01("101").unwrap();
        let b = BitVector::parse01("0011").unwrap();
        let c = a.concat(&b);
        assert_eq!(c.to_string01(), "1010011");
        assert_eq!(c.slice(3, 7), b);
        assert_eq!(a.agreement(&BitVector::parse01("100").unwrap()), 2);
    }
}
