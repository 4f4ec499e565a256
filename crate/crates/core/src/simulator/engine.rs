use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::netlist::{topo_order, Driver, GateKind, Netlist};

#[derive(Debug, Clone)]
struct Op {
    kind: GateKind,
    start: u32,
    end: u32,
    dest: u32,
}

/// A netlist lowered to integer signal slots in topological order.
///
/// Slots `0..inputs` hold the primary inputs; each gate writes one further
/// slot. The same op list drives both the scalar path (`bool` per slot) and
/// the 64-lane path (`u64` per slot, one stimulus per bit lane).
#[derive(Debug, Clone)]
pub struct Simulator {
    inputs: usize,
    slots: usize,
    ops: Vec<Op>,
    fanin: Vec<u32>,
    outputs: Vec<u32>,
}

impl Simulator {
    pub fn new(n: &Netlist) -> Self {
        let drivers = n.drivers();
        let order = topo_order(n);
        let inputs = n.input_count();
        let mut slot_of_gate = vec![0u32; n.gate_count()];
        for (pos, &g) in order.as_slice().iter().enumerate() {
            slot_of_gate[g] = (inputs + pos) as u32;
        }
        let slot: BTreeMap<&str, u32> = drivers
            .iter()
            .map(|(name, d)| {
                let s = match *d {
                    Driver::Input(i) => i as u32,
                    Driver::Gate(g) => slot_of_gate[g],
                };
                (*name, s)
            })
            .collect();
        let mut ops = Vec::with_capacity(n.gate_count());
        let mut fanin = Vec::new();
        for &g in order.as_slice() {
            let gate = &n.gates()[g];
            let start = fanin.len() as u32;
            fanin.extend(gate.fanin.iter().map(|f| slot[f.as_str()]));
            ops.push(Op {
                kind: gate.kind,
                start,
                end: fanin.len() as u32,
                dest: slot_of_gate[g],
            });
        }
        let outputs = n.outputs().iter().map(|o| slot[o.as_str()]).collect();
        Self {
            inputs,
            slots: inputs + n.gate_count(),
            ops,
            fanin,
            outputs,
        }
    }

    pub fn input_count(&self) -> usize {
        self.inputs
    }

    pub fn output_count(&self) -> usize {
        self.outputs.len()
    }

    /// Scratch length needed by [`Simulator::eval_words`].
    pub fn slot_count(&self) -> usize {
        self.slots
    }

    /// One scalar pass over the gates.
    pub fn eval_bools(&self, inputs: &[bool]) -> Vec<bool> {
        assert_eq!(inputs.len(), self.inputs);
        let mut v = vec![false; self.slots];
        v[..self.inputs].copy_from_slice(inputs);
        for op in &self.ops {
            let args = &self.fanin[op.start as usize..op.end as usize];
            v[op.dest as usize] = op.kind.eval_bool(args.iter().map(|&a| v[a as usize]));
        }
        self.outputs.iter().map(|&o| v[o as usize]).collect()
    }

    /// Evaluates 64 stimuli at once. `values[..inputs]` must hold the input
    /// words; on return every slot holds its signal word.
    pub fn eval_words(&self, values: &mut [u64]) {
        debug_assert_eq!(values.len(), self.slots);
        for op in &self.ops {
            let args = &self.fanin[op.start as usize..op.end as usize];
            let first = values[args[0] as usize];
            let rest = args[1..].iter().map(|&a| values[a as usize]);
            let w = match op.kind {
                GateKind::And => rest.fold(first, |a, b| a & b),
                GateKind::Nand => !rest.fold(first, |a, b| a & b),
                GateKind::Or => rest.fold(first, |a, b| a | b),
                GateKind::Nor => !rest.fold(first, |a, b| a | b),
                GateKind::Xor => rest.fold(first, |a, b| a ^ b),
                GateKind::Xnor => !rest.fold(first, |a, b| a ^ b),
                GateKind::Not => !first,
                GateKind::Buf => first,
            };
            values[op.dest as usize] = w;
        }
    }

    /// Output word `k` after [`Simulator::eval_words`].
    #[inline]
    pub fn output_word(&self, values: &[u64], k: usize) -> u64 {
        values[self.outputs[k] as usize]
    }
}
