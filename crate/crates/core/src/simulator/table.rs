use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{SimError, Simulator};
use crate::bits::BitVector;
use crate::netlist::Netlist;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TableError {
    #[error("row {row}: {what} width {found}, expected {expected}")]
    RowWidth {
        row: usize,
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("sample count must be at least 1")]
    EmptyRequest,
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Stimulus/response samples with their pin ordering.
///
/// Rows may repeat; nothing deduplicates random stimuli.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IoTable {
    input_names: Vec<String>,
    output_names: Vec<String>,
    rows: Vec<(BitVector, BitVector)>,
    pub seed: Option<u64>,
    pub source: String,
}

impl IoTable {
    pub fn new(
        input_names: Vec<String>,
        output_names: Vec<String>,
        rows: Vec<(BitVector, BitVector)>,
        seed: Option<u64>,
        source: impl Into<String>,
    ) -> Result<Self, TableError> {
        for (row, (x, y)) in rows.iter().enumerate() {
            if x.len() != input_names.len() {
                return Err(TableError::RowWidth {
                    row,
                    what: "input",
                    expected: input_names.len(),
                    found: x.len(),
                });
            }
            if y.len() != output_names.len() {
                return Err(TableError::RowWidth {
                    row,
                    what: "output",
                    expected: output_names.len(),
                    found: y.len(),
                });
            }
        }
        Ok(Self {
            input_names,
            output_names,
            rows,
            seed,
            source: source.into(),
        })
    }

    pub fn input_names(&self) -> &[String] {
        &self.input_names
    }

    pub fn output_names(&self) -> &[String] {
        &self.output_names
    }

    pub fn input_width(&self) -> usize {
        self.input_names.len()
    }

    pub fn output_width(&self) -> usize {
        self.output_names.len()
    }

    pub fn rows(&self) -> &[(BitVector, BitVector)] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// A table over the same pins holding the selected rows, in order.
    pub fn select(&self, indices: &[usize]) -> IoTable {
        IoTable {
            input_names: self.input_names.clone(),
            output_names: self.output_names.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            seed: self.seed,
            source: self.source.clone(),
        }
    }

    /// The first `n` rows and the rest.
    pub fn split_at(&self, n: usize) -> (IoTable, IoTable) {
        let n = n.min(self.len());
        let head: Vec<usize> = (0..n).collect();
        let tail: Vec<usize> = (n..self.len()).collect();
        (self.select(&head), self.select(&tail))
    }

    /// Swaps the roles of stimuli and responses.
    pub fn transposed(&self) -> IoTable {
        IoTable {
            input_names: self.output_names.clone(),
            output_names: self.input_names.clone(),
            rows: self.rows.iter().map(|(x, y)| (y.clone(), x.clone())).collect(),
            seed: self.seed,
            source: self.source.clone(),
        }
    }
}

/// `count` uniformly random stimuli and their responses; reproducible per seed.
pub fn gen_io_table(n: &Netlist, count: usize, seed: u64) -> Result<IoTable, TableError> {
    if count == 0 {
        return Err(TableError::EmptyRequest);
    }
    let mut r = rng::seeded(seed);
    let xs: Vec<BitVector> = (0..count)
        .map(|_| BitVector::random(&mut r, n.input_count()))
        .collect();
    let ys = Simulator::new(n).eval_batch(&xs)?;
    IoTable::new(
        n.inputs().to_vec(),
        n.outputs().to_vec(),
        xs.into_iter().zip(ys).collect(),
        Some(seed),
        n.name(),
    )
}
