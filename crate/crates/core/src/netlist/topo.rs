use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

use super::{Driver, Netlist, NetlistError};

/// Gate indices in an order where every gate follows the gates driving its
/// fan-ins. Ties are broken by declaration index, so the order is a pure
/// function of the netlist.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopoOrder(pub Vec<usize>);

impl TopoOrder {
    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

pub fn topo_order(n: &Netlist) -> TopoOrder {
    order_with_drivers(n, &n.drivers()).expect("netlist invariants checked at construction")
}

pub(super) fn order_with_drivers(
    n: &Netlist,
    drivers: &BTreeMap<&str, Driver>,
) -> Result<TopoOrder, NetlistError> {
    let gates = n.gates();
    let mut indegree = vec![0usize; gates.len()];
    let mut consumers: Vec<Vec<usize>> = vec![Vec::new(); gates.len()];
    for (gi, g) in gates.iter().enumerate() {
        for f in &g.fanin {
            match drivers.get(f.as_str()) {
                Some(Driver::Gate(src)) => {
                    indegree[gi] += 1;
                    consumers[*src].push(gi);
                }
                Some(Driver::Input(_)) => {}
                None => return Err(NetlistError::UndeclaredSignal(f.clone())),
            }
        }
    }

    let mut ready: BinaryHeap<Reverse<usize>> = indegree
        .iter()
        .enumerate()
        .filter(|(_, &d)| d == 0)
        .map(|(i, _)| Reverse(i))
        .collect();
    let mut order = Vec::with_capacity(gates.len());
    while let Some(Reverse(gi)) = ready.pop() {
        order.push(gi);
        for &c in &consumers[gi] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                ready.push(Reverse(c));
            }
        }
    }
    if order.len() == gates.len() {
        return Ok(TopoOrder(order));
    }
    Err(NetlistError::Cycle(find_cycle(n, drivers, &indegree)))
}

/// Walks fan-in edges among unprocessed gates until a gate repeats.
fn find_cycle(n: &Netlist, drivers: &BTreeMap<&str, Driver>, indegree: &[usize]) -> Vec<String> {
    let gates = n.gates();
    let start = indegree.iter().position(|&d| d > 0).expect("some gate is stuck");
    let mut path = vec![start];
    let mut pos_in_path = BTreeMap::new();
    pos_in_path.insert(start, 0usize);
    let mut cur = start;
    loop {
        let next = gates[cur]
            .fanin
            .iter()
            .find_map(|f| match drivers.get(f.as_str()) {
                Some(Driver::Gate(src)) if indegree[*src] > 0 => Some(*src),
                _ => None,
            })
            .expect("stuck gate has a stuck predecessor");
        if let Some(&p) = pos_in_path.get(&next) {
            // path holds consumer → driver links; report driver → consumer.
            let mut cycle: Vec<String> = path[p..].iter().map(|&g| gates[g].output.clone()).collect();
            cycle.reverse();
            return cycle;
        }
        pos_in_path.insert(next, path.len());
        path.push(next);
        cur = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::parse_bench;

    #[test]
    fn single_gate() {
        let n = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\ny = NAND(a, b)\n", "t").unwrap();
        assert_eq!(topo_order(&n).0, vec![0]);
    }

    #[test]
    fn dependency_forces_reversal() {
        let n = parse_bench("INPUT(a)\nOUTPUT(g2)\ng2 = NOT(g1)\ng1 = NOT(a)\n", "t").unwrap();
        assert_eq!(topo_order(&n).0, vec![1, 0]);
    }

    #[test]
    fn cycle_is_reported_with_its_signals() {
        let err = parse_bench(
            "INPUT(a)\nOUTPUT(y)\nx = AND(a, y)\ny = NOT(z)\nz = BUFF(x)\n",
            "t",
        )
        .unwrap_err();
        match err {
            NetlistError::Cycle(sigs) => {
                assert_eq!(sigs.len(), 3);
                for s in ["x", "y", "z"] {
                    assert!(sigs.iter().any(|c| c == s));
                }
            }
            other => panic!("expected cycle, got {other:?}"),
        }
    }
}
