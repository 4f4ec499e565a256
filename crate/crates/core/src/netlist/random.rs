//! Seeded random combinational netlists.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng as _;

use super::{Gate, GateKind, Netlist};
use crate::rng;

/// Shape of a generated netlist.
#[derive(Debug, Clone)]
pub struct DagShape {
    pub inputs: usize,
    pub gates: usize,
    pub outputs: usize,
    /// Largest fan-in for AND/NAND/OR/NOR gates (at least 2).
    pub max_fanin: usize,
    /// Fan-ins are drawn from the most recent `window` signals; 0 means all.
    pub window: usize,
    /// Relative weights for AND, NAND, OR, NOR, XOR, XNOR, NOT, BUF.
    pub kind_weights: [u32; 8],
}

impl DagShape {
    pub fn new(inputs: usize, gates: usize, outputs: usize) -> Self {
        Self {
            inputs,
            gates,
            outputs,
            max_fanin: 3,
            window: 0,
            kind_weights: [3, 3, 3, 3, 1, 1, 1, 1],
        }
    }
}

/// Generates a random acyclic netlist. Signals are named `i{k}` (inputs) and
/// `n{k}` (gates); outputs are the last `outputs` gates.
///
/// # Panics
///
/// If `inputs == 0` or `outputs > gates`.
pub fn random_dag(shape: &DagShape, seed: u64) -> Netlist {
    assert!(shape.inputs > 0, "need at least one input");
    assert!(shape.outputs <= shape.gates, "more outputs than gates");
    let mut r = rng::seeded(seed);
    let inputs: Vec<String> = (0..shape.inputs).map(|i| format!("i{i}")).collect();
    let mut signals = inputs.clone();
    let total: u32 = shape.kind_weights.iter().sum();
    let mut gates = Vec::with_capacity(shape.gates);
    for g in 0..shape.gates {
        let mut pick = r.gen_range(0..total);
        let mut kind = GateKind::And;
        for (k, &w) in GateKind::ALL.iter().zip(&shape.kind_weights) {
            if pick < w {
                kind = *k;
                break;
            }
            pick -= w;
        }
        let arity = match kind {
            GateKind::Not | GateKind::Buf => 1,
            GateKind::Xor | GateKind::Xnor => 2,
            _ => r.gen_range(2..=shape.max_fanin.max(2)),
        };
        let lo = if shape.window == 0 {
            0
        } else {
            signals.len().saturating_sub(shape.window)
        };
        let pool = signals.len() - lo;
        let mut fanin: Vec<String> = Vec::with_capacity(arity);
        // Distinct fan-ins when the pool allows it.
        while fanin.len() < arity {
            let s = &signals[lo + r.gen_range(0..pool)];
            if pool < arity || !fanin.contains(s) {
                fanin.push(s.clone());
            }
        }
        let out = format!("n{g}");
        gates.push(Gate {
            output: out.clone(),
            kind,
            fanin,
        });
        signals.push(out);
    }
    let outputs = gates[shape.gates - shape.outputs..]
        .iter()
        .map(|g| g.output.clone())
        .collect();
    Netlist::new(format!("rand{}", shape.gates), inputs, outputs, gates)
        .expect("generator emits valid netlists")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_per_seed() {
        let shape = DagShape::new(8, 100, 4);
        assert_eq!(random_dag(&shape, 5), random_dag(&shape, 5));
        assert_ne!(random_dag(&shape, 5), random_dag(&shape, 6));
    }

    #[test]
    fn honors_shape() {
        let n = random_dag(&DagShape::new(8, 100, 4), 1);
        assert_eq!(n.input_count(), 8);
        assert_eq!(n.gate_count(), 100);
        assert_eq!(n.output_count(), 4);
    }
}
