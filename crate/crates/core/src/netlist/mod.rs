//! Combinational gate-level netlists.
//!
//! A [`Netlist`] is an acyclic graph of typed gates between named primary
//! inputs and outputs. Every value of the type satisfies the single-driver
//! rule, the arity rules of [`GateKind`] and acyclicity; the only way to
//! build one is [`Netlist::new`] (or the `.bench` parser, which calls it).

mod bench;
pub mod random;
mod topo;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

pub use bench::{parse_bench, serialize_bench};
pub use topo::{topo_order, TopoOrder};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GateKind {
    And,
    Nand,
    Or,
    Nor,
    Xor,
    Xnor,
    Not,
    Buf,
}

impl GateKind {
    pub const ALL: [GateKind; 8] = [
        GateKind::And,
        GateKind::Nand,
        GateKind::Or,
        GateKind::Nor,
        GateKind::Xor,
        GateKind::Xnor,
        GateKind::Not,
        GateKind::Buf,
    ];

    pub fn is_unary(self) -> bool {
        matches!(self, GateKind::Not | GateKind::Buf)
    }

    /// Whether `n` fan-ins are legal. XOR/XNOR are strictly two-input.
    pub fn accepts_arity(self, n: usize) -> bool {
        match self {
            GateKind::Not | GateKind::Buf => n == 1,
            GateKind::Xor | GateKind::Xnor => n == 2,
            _ => n >= 2,
        }
    }

    /// Keyword used in `.bench` files.
    pub fn bench_name(self) -> &'static str {
        match self {
            GateKind::And => "AND",
            GateKind::Nand => "NAND",
            GateKind::Or => "OR",
            GateKind::Nor => "NOR",
            GateKind::Xor => "XOR",
            GateKind::Xnor => "XNOR",
            GateKind::Not => "NOT",
            GateKind::Buf => "BUFF",
        }
    }

    /// Scalar semantics over fan-in values.
    pub fn eval_bool(self, fanin: impl IntoIterator<Item = bool>) -> bool {
        let mut it = fanin.into_iter();
        match self {
            GateKind::And => it.all(|b| b),
            GateKind::Nand => !it.all(|b| b),
            GateKind::Or => it.any(|b| b),
            GateKind::Nor => !it.any(|b| b),
            GateKind::Xor => it.fold(false, |a, b| a ^ b),
            GateKind::Xnor => !it.fold(false, |a, b| a ^ b),
            GateKind::Not => !it.next().unwrap_or(false),
            GateKind::Buf => it.next().unwrap_or(false),
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.bench_name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown gate kind {0:?}")]
pub struct UnknownGateKind(pub String);

impl FromStr for GateKind {
    type Err = UnknownGateKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s.to_ascii_uppercase().as_str() {
            "AND" => GateKind::And,
            "NAND" => GateKind::Nand,
            "OR" => GateKind::Or,
            "NOR" => GateKind::Nor,
            "XOR" => GateKind::Xor,
            "XNOR" => GateKind::Xnor,
            "NOT" | "INV" => GateKind::Not,
            "BUF" | "BUFF" => GateKind::Buf,
            _ => return Err(UnknownGateKind(s.into())),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Gate {
    pub output: String,
    pub kind: GateKind,
    pub fanin: Vec<String>,
}

impl Gate {
    pub fn new(output: impl Into<String>, kind: GateKind, fanin: &[&str]) -> Self {
        Self {
            output: output.into(),
            kind,
            fanin: fanin.iter().map(|s| String::from(*s)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NetlistError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid signal name {0:?}")]
    InvalidName(String),
    #[error("undeclared signal {0:?}")]
    UndeclaredSignal(String),
    #[error("signal {0:?} has more than one driver")]
    DuplicateDriver(String),
    #[error("output {0:?} declared more than once")]
    DuplicateOutput(String),
    #[error("gate {signal:?}: {kind} cannot take {found} fan-ins")]
    Arity {
        signal: String,
        kind: GateKind,
        found: usize,
    },
    #[error("combinational cycle through {}", .0.join(" -> "))]
    Cycle(Vec<String>),
}

/// Where a signal comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Driver {
    Input(usize),
    Gate(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Netlist {
    name: String,
    inputs: Vec<String>,
    outputs: Vec<String>,
    gates: Vec<Gate>,
}

pub(crate) fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

impl Netlist {
    /// Builds a netlist, checking every structural invariant.
    pub fn new(
        name: impl Into<String>,
        inputs: Vec<String>,
        outputs: Vec<String>,
        gates: Vec<Gate>,
    ) -> Result<Self, NetlistError> {
        let n = Self {
            name: name.into(),
            inputs,
            outputs,
            gates,
        };
        n.validate()?;
        Ok(n)
    }

    fn validate(&self) -> Result<(), NetlistError> {
        let drivers = self.build_drivers()?;
        for g in &self.gates {
            if !g.kind.accepts_arity(g.fanin.len()) {
                return Err(NetlistError::Arity {
                    signal: g.output.clone(),
                    kind: g.kind,
                    found: g.fanin.len(),
                });
            }
            for f in &g.fanin {
                if !drivers.contains_key(f.as_str()) {
                    return Err(NetlistError::UndeclaredSignal(f.clone()));
                }
            }
        }
        let mut seen_out = BTreeMap::new();
        for o in &self.outputs {
            if !valid_name(o) {
                return Err(NetlistError::InvalidName(o.clone()));
            }
            if seen_out.insert(o.as_str(), ()).is_some() {
                return Err(NetlistError::DuplicateOutput(o.clone()));
            }
            if !drivers.contains_key(o.as_str()) {
                return Err(NetlistError::UndeclaredSignal(o.clone()));
            }
        }
        topo::order_with_drivers(self, &drivers)?;
        Ok(())
    }

    fn build_drivers(&self) -> Result<BTreeMap<&str, Driver>, NetlistError> {
        let mut drivers = BTreeMap::new();
        let named = self
            .inputs
            .iter()
            .enumerate()
            .map(|(i, s)| (s, Driver::Input(i)))
            .chain(
                self.gates
                    .iter()
                    .enumerate()
                    .map(|(i, g)| (&g.output, Driver::Gate(i))),
            );
        for (s, d) in named {
            if !valid_name(s) {
                return Err(NetlistError::InvalidName(s.clone()));
            }
            if drivers.insert(s.as_str(), d).is_some() {
                return Err(NetlistError::DuplicateDriver(s.clone()));
            }
        }
        Ok(drivers)
    }

    /// Signal name → driver lookup.
    pub fn drivers(&self) -> BTreeMap<&str, Driver> {
        self.build_drivers()
            .expect("netlist invariants checked at construction")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn inputs(&self) -> &[String] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn input_count(&self) -> usize {
        self.inputs.len()
    }

    pub fn output_count(&self) -> usize {
        self.outputs.len()
    }

    pub fn gate_count(&self) -> usize {
        self.gates.len()
    }

    /// Whether `signal` is declared as a primary output.
    pub fn is_output(&self, signal: &str) -> bool {
        self.outputs.iter().any(|o| o == signal)
    }

    pub fn has_signal(&self, signal: &str) -> bool {
        self.inputs.iter().any(|s| s == signal) || self.gates.iter().any(|g| g.output == signal)
    }

    /// Same input and output name lists, in order.
    pub fn same_signature(&self, other: &Netlist) -> bool {
        self.inputs == other.inputs && self.outputs == other.outputs
    }

    /// Consumes the netlist into its parts (name, inputs, outputs, gates).
    pub fn into_parts(self) -> (String, Vec<String>, Vec<String>, Vec<Gate>) {
        (self.name, self.inputs, self.outputs, self.gates)
    }
}
