//! Gate-level logic locking and deep-recurrent-network attacks on locked
//! combinational circuits.
//!
//! The crate is `no_std` (it needs `alloc`) and performs no IO. File
//! formats, the command line and experiment sweeps live in the `lockrnn`
//! companion crate.
//!
//! Modules, bottom-up:
//!
//! - [`bits`]: packed bit vectors used for stimuli, responses and keys.
//! - [`netlist`]: the `.bench` format, netlist validation and topological order.
//! - [`simulator`]: scalar and 64-lane bit-parallel evaluation, oracle tables,
//!   exhaustive key enumeration.
//! - [`locking`]: XOR/XNOR key-gate insertion, key application, equivalence checks.
//! - [`drnn`]: peephole LSTM with momentum backpropagation through time.
//! - [`attacks`]: key reconstruction, output guessing and input guessing.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod attacks;
pub mod bits;
pub mod drnn;
pub mod locking;
pub mod netlist;
pub mod rng;
pub mod simulator;

pub use bits::BitVector;
pub use locking::{Key, LockedNetlist};
pub use netlist::{GateKind, Netlist};
pub use simulator::IoTable;
