use alloc::vec;
use alloc::vec::Vec;

use super::{lane_mask, pack_block, IoTable, Simulator, LANES};
use crate::bits::BitVector;
use crate::locking::{Key, LockError, LockedNetlist};

/// Enumeration guard for [`brute_force_keys`].
pub const MAX_BRUTE_FORCE_KEY_WIDTH: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct KeyScore {
    pub key: Key,
    /// Fraction of oracle rows reproduced exactly.
    pub match_rate: f64,
}

/// Exact match-rate scoring of candidate keys against an oracle table, with
/// the oracle pre-packed into 64-row blocks.
#[derive(Debug, Clone)]
pub struct KeyScorer {
    sim: Simulator,
    functional: usize,
    key_width: usize,
    blocks: Vec<Block>,
    rows: usize,
}

#[derive(Debug, Clone)]
struct Block {
    inputs: Vec<u64>,
    outputs: Vec<u64>,
    mask: u64,
}

impl KeyScorer {
    pub fn new(locked: &LockedNetlist, oracle: &IoTable) -> Result<Self, LockError> {
        let functional = locked.functional_inputs();
        if oracle.input_names() != functional || oracle.output_names() != locked.netlist().outputs()
        {
            return Err(LockError::SignatureMismatch);
        }
        let blocks = oracle
            .rows()
            .chunks(LANES)
            .map(|chunk| {
                let xs: Vec<BitVector> = chunk.iter().map(|(x, _)| x.clone()).collect();
                let ys: Vec<BitVector> = chunk.iter().map(|(_, y)| y.clone()).collect();
                let mut inputs = vec![0u64; functional.len()];
                let mut outputs = vec![0u64; oracle.output_width()];
                pack_block(&xs, &mut inputs);
                pack_block(&ys, &mut outputs);
                Block {
                    inputs,
                    outputs,
                    mask: lane_mask(chunk.len()),
                }
            })
            .collect();
        Ok(Self {
            sim: Simulator::new(locked.netlist()),
            functional: functional.len(),
            key_width: locked.key_width(),
            blocks,
            rows: oracle.len(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of oracle rows the key reproduces exactly.
    pub fn matches(&self, key: &Key) -> Result<usize, LockError> {
        if key.width() != self.key_width {
            return Err(LockError::KeyWidthMismatch {
                expected: self.key_width,
                found: key.width(),
            });
        }
        let mut values = vec![0u64; self.sim.slot_count()];
        for (i, b) in key.bits().iter().enumerate() {
            values[self.functional + i] = if b { u64::MAX } else { 0 };
        }
        let mut matched = 0;
        for block in &self.blocks {
            values[..self.functional].copy_from_slice(&block.inputs);
            self.sim.eval_words(&mut values);
            let mut wrong = 0u64;
            for (k, &want) in block.outputs.iter().enumerate() {
                wrong |= self.sim.output_word(&values, k) ^ want;
            }
            matched += (block.mask & !wrong).count_ones() as usize;
        }
        Ok(matched)
    }

    pub fn match_rate(&self, key: &Key) -> Result<f64, LockError> {
        if self.rows == 0 {
            return Err(LockError::EmptyOracle);
        }
        Ok(self.matches(key)? as f64 / self.rows as f64)
    }
}

/// Scores every key of the locked netlist's width against the oracle,
/// best first (ties in ascending key order, key bit `i` = bit `i` of the
/// enumeration counter).
pub fn brute_force_keys(
    locked: &LockedNetlist,
    oracle: &IoTable,
) -> Result<Vec<KeyScore>, LockError> {
    let width = locked.key_width();
    if width > MAX_BRUTE_FORCE_KEY_WIDTH {
        return Err(LockError::KeyTooWideToEnumerate {
            width,
            max: MAX_BRUTE_FORCE_KEY_WIDTH,
        });
    }
    if oracle.is_empty() {
        return Err(LockError::EmptyOracle);
    }
    let scorer = KeyScorer::new(locked, oracle)?;
    let mut scores = Vec::with_capacity(1 << width);
    for v in 0..(1u64 << width) {
        let key = Key::new(BitVector::from_u64(v, width));
        let match_rate = scorer.match_rate(&key)?;
        scores.push(KeyScore { key, match_rate });
    }
    scores.sort_by(|a, b| b.match_rate.total_cmp(&a.match_rate));
    Ok(scores)
}
