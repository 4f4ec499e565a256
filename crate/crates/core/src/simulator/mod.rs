//! Netlist evaluation, oracle tables and exhaustive key enumeration.

mod brute;
mod engine;
mod table;

use alloc::vec;
use alloc::vec::Vec;

use crate::bits::BitVector;
use crate::netlist::Netlist;

pub use brute::{brute_force_keys, KeyScore, KeyScorer, MAX_BRUTE_FORCE_KEY_WIDTH};
pub use engine::Simulator;
pub use table::{gen_io_table, IoTable, TableError};

/// Stimulus packing granularity of the bit-parallel engine.
pub const LANES: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("stimulus width {found} does not match {expected} inputs")]
    WidthMismatch { expected: usize, found: usize },
}

/// Evaluates one stimulus.
pub fn evaluate(n: &Netlist, x: &BitVector) -> Result<BitVector, SimError> {
    Simulator::new(n).eval(x)
}

/// Evaluates many stimuli, 64 per machine word.
pub fn evaluate_batch(n: &Netlist, xs: &[BitVector]) -> Result<Vec<BitVector>, SimError> {
    Simulator::new(n).eval_batch(xs)
}

impl Simulator {
    pub fn eval(&self, x: &BitVector) -> Result<BitVector, SimError> {
        self.check_width(x)?;
        Ok(BitVector::from_bools(&self.eval_bools(&x.to_bools())))
    }

    pub fn eval_batch(&self, xs: &[BitVector]) -> Result<Vec<BitVector>, SimError> {
        for x in xs {
            self.check_width(x)?;
        }
        let mut out = Vec::with_capacity(xs.len());
        let mut values = vec![0u64; self.slot_count()];
        for block in xs.chunks(LANES) {
            pack_block(block, &mut values[..self.input_count()]);
            self.eval_words(&mut values);
            for lane in 0..block.len() {
                let mut y = BitVector::zeros(self.output_count());
                for k in 0..self.output_count() {
                    y.set(k, (self.output_word(&values, k) >> lane) & 1 == 1);
                }
                out.push(y);
            }
        }
        Ok(out)
    }

    fn check_width(&self, x: &BitVector) -> Result<(), SimError> {
        if x.len() != self.input_count() {
            return Err(SimError::WidthMismatch {
                expected: self.input_count(),
                found: x.len(),
            });
        }
        Ok(())
    }
}

/// Transposes up to 64 vectors into one word per bit position.
pub(crate) fn pack_block(block: &[BitVector], words: &mut [u64]) {
    words.fill(0);
    for (lane, x) in block.iter().enumerate() {
        for (i, w) in words.iter_mut().enumerate() {
            if x.get(i) {
                *w |= 1u64 << lane;
            }
        }
    }
}

/// Mask of the valid lanes in a block holding `n` vectors.
#[inline]
pub(crate) fn lane_mask(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}
