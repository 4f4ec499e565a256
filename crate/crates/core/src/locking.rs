//! Logic encryption by random XOR/XNOR key-gate insertion.
//!
//! A key gate splices a wire `w`: the original driver is renamed and the key
//! gate takes over the name `w`, so every consumer and output tap sees
//! `w ⊕ keyinput{i}` (XOR) or `¬(w ⊕ keyinput{i})` (XNOR). The correct key
//! bit is whichever value makes the gate a pass-through.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::bits::{BitParseError, BitVector};
use crate::netlist::{Gate, GateKind, Netlist, NetlistError};
use crate::rng;
use crate::simulator::{lane_mask, Simulator, LANES};

pub const KEY_INPUT_PREFIX: &str = "keyinput";

/// Inputs up to this count are checked exhaustively.
pub const EXHAUSTIVE_INPUT_LIMIT: usize = 20;
/// Random vectors used when a circuit is too wide to enumerate.
pub const CERTIFY_SAMPLES: usize = 4096;
/// Site redraws allowed per key bit before locking gives up.
pub const CERTIFY_RETRIES: usize = 32;

pub fn key_input_name(i: usize) -> String {
    format!("{KEY_INPUT_PREFIX}{i}")
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LockError {
    #[error("key width must be at least 1")]
    ZeroKeyWidth,
    #[error("only {available} insertable wires for a {requested}-bit key")]
    InsufficientWires { requested: usize, available: usize },
    #[error("key bit {bit}: no observable insertion site after {retries} retries")]
    CertificationFailed { bit: usize, retries: usize },
    #[error("key width {found} does not match {expected} key inputs")]
    KeyWidthMismatch { expected: usize, found: usize },
    #[error("key inputs must be keyinput0..keyinput{{k-1}} after all functional inputs: {0}")]
    KeyInputLayout(String),
    #[error("netlist already uses the name {0:?}")]
    NameClash(String),
    #[error("signal {0:?} becomes constant once the key is applied")]
    ConstantSignal(String),
    #[error("netlists have different input/output signatures")]
    SignatureMismatch,
    #[error("oracle table is empty")]
    EmptyOracle,
    #[error("key width {width} exceeds the enumeration limit of {max}")]
    KeyTooWideToEnumerate { width: usize, max: usize },
    #[error(transparent)]
    Netlist(#[from] NetlistError),
    #[error(transparent)]
    Parse(#[from] BitParseError),
}

/// A key; bit `i` drives `keyinput{i}`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Key(BitVector);

impl Key {
    pub fn new(bits: BitVector) -> Self {
        Self(bits)
    }

    /// `'0'`/`'1'` characters; the leftmost one is bit 0.
    pub fn parse01(s: &str) -> Result<Self, BitParseError> {
        BitVector::parse01(s).map(Self)
    }

    pub fn width(&self) -> usize {
        self.0.len()
    }

    pub fn bits(&self) -> &BitVector {
        &self.0
    }

    pub fn bit(&self, i: usize) -> bool {
        self.0.get(i)
    }

    pub fn with_flipped(&self, i: usize) -> Key {
        let mut k = self.clone();
        k.0.flip(i);
        k
    }

    /// Fraction of bit positions equal to `other`.
    pub fn bit_agreement(&self, other: &Key) -> f64 {
        if self.width() == 0 {
            return 1.0;
        }
        self.0.agreement(&other.0) as f64 / self.width() as f64
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl fmt::Debug for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Key({})", self.0)
    }
}

/// A netlist whose trailing inputs are key inputs, optionally paired with
/// the correct key (evaluation mode).
#[derive(Debug, Clone, PartialEq)]
pub struct LockedNetlist {
    netlist: Netlist,
    key_width: usize,
    correct_key: Option<Key>,
}

impl LockedNetlist {
    /// Recognizes key inputs by the `keyinput` prefix.
    pub fn from_netlist(netlist: Netlist) -> Result<Self, LockError> {
        let inputs = netlist.inputs();
        let first_key = inputs
            .iter()
            .position(|s| s.starts_with(KEY_INPUT_PREFIX))
            .unwrap_or(inputs.len());
        let key_width = inputs.len() - first_key;
        for (i, name) in inputs[first_key..].iter().enumerate() {
            if *name != key_input_name(i) {
                return Err(LockError::KeyInputLayout(format!(
                    "input {} is {name:?}, expected {:?}",
                    first_key + i,
                    key_input_name(i)
                )));
            }
        }
        Ok(Self {
            netlist,
            key_width,
            correct_key: None,
        })
    }

    pub fn with_correct_key(mut self, key: Key) -> Result<Self, LockError> {
        self.check_width(&key)?;
        self.correct_key = Some(key);
        Ok(self)
    }

    /// The same structure with the correct key forgotten.
    pub fn without_key(&self) -> Self {
        Self {
            netlist: self.netlist.clone(),
            key_width: self.key_width,
            correct_key: None,
        }
    }

    pub fn netlist(&self) -> &Netlist {
        &self.netlist
    }

    pub fn key_width(&self) -> usize {
        self.key_width
    }

    pub fn correct_key(&self) -> Option<&Key> {
        self.correct_key.as_ref()
    }

    pub fn functional_inputs(&self) -> &[String] {
        let n = self.netlist.input_count();
        &self.netlist.inputs()[..n - self.key_width]
    }

    pub fn check_width(&self, key: &Key) -> Result<(), LockError> {
        if key.width() != self.key_width {
            return Err(LockError::KeyWidthMismatch {
                expected: self.key_width,
                found: key.width(),
            });
        }
        Ok(())
    }
}

/// Inserts `key_width` certified-observable key gates at random wires.
///
/// Wires that are not primary outputs are used first; primary-output gate
/// wires are the fallback. XOR or XNOR is drawn uniformly per bit, fixing the
/// correct bit (0 for XOR, 1 for XNOR). A site whose key bit cannot change
/// any output is discarded and redrawn, at most [`CERTIFY_RETRIES`] times
/// per bit.
pub fn lock_random(
    n: &Netlist,
    key_width: usize,
    seed: u64,
) -> Result<(LockedNetlist, Key), LockError> {
    if key_width == 0 {
        return Err(LockError::ZeroKeyWidth);
    }
    for i in 0..key_width {
        let name = key_input_name(i);
        if n.has_signal(&name) {
            return Err(LockError::NameClash(name));
        }
    }
    let mut r = rng::seeded(seed);
    let mut internal: Vec<usize> = Vec::new();
    let mut at_outputs: Vec<usize> = Vec::new();
    for (gi, g) in n.gates().iter().enumerate() {
        if n.is_output(&g.output) {
            at_outputs.push(gi);
        } else {
            internal.push(gi);
        }
    }
    let available = internal.len() + at_outputs.len();
    if available < key_width {
        return Err(LockError::InsufficientWires {
            requested: key_width,
            available,
        });
    }
    rng::shuffle(&mut r, &mut internal);
    rng::shuffle(&mut r, &mut at_outputs);
    let mut sites = internal.into_iter().chain(at_outputs);

    let name = String::from(n.name());
    let mut inputs: Vec<String> = n.inputs().to_vec();
    let outputs: Vec<String> = n.outputs().to_vec();
    // `slots[g]` holds original gate g followed by any key gate spliced after it.
    let mut slots: Vec<Vec<Gate>> = n.gates().iter().map(|g| vec![g.clone()]).collect();
    let mut key_bits = Vec::with_capacity(key_width);
    let mut current = n.clone();

    for bit in 0..key_width {
        let mut certified = false;
        for _ in 0..CERTIFY_RETRIES {
            let Some(site) = sites.next() else {
                return Err(LockError::InsufficientWires {
                    requested: key_width,
                    available,
                });
            };
            let kind = if r.gen::<bool>() {
                GateKind::Xnor
            } else {
                GateKind::Xor
            };
            let correct = kind == GateKind::Xnor;
            let wire = n.gates()[site].output.clone();
            let renamed = fresh_name(&current, &format!("{wire}_lk{bit}"));
            let key_name = key_input_name(bit);

            let mut trial_slots = slots.clone();
            trial_slots[site][0].output = renamed.clone();
            trial_slots[site].push(Gate {
                output: wire,
                kind,
                fanin: vec![renamed, key_name.clone()],
            });
            let mut trial_inputs = inputs.clone();
            trial_inputs.push(key_name);
            let candidate = Netlist::new(
                name.clone(),
                trial_inputs.clone(),
                outputs.clone(),
                trial_slots.iter().flatten().cloned().collect(),
            )?;

            let mut key = key_bits.clone();
            key.push(correct);
            if bit_is_observable(&candidate, n.input_count(), &key, bit, rng::derive_seed(seed, bit as u64)) {
                slots = trial_slots;
                inputs = trial_inputs;
                key_bits = key;
                current = candidate;
                certified = true;
                break;
            }
        }
        if !certified {
            return Err(LockError::CertificationFailed {
                bit,
                retries: CERTIFY_RETRIES,
            });
        }
    }

    let key = Key::new(BitVector::from_bools(&key_bits));
    let locked = LockedNetlist::from_netlist(current)?.with_correct_key(key.clone())?;
    Ok((locked, key))
}

fn fresh_name(n: &Netlist, base: &str) -> String {
    let mut name = String::from(base);
    while n.has_signal(&name) {
        name.push('_');
    }
    name
}

/// Whether flipping key bit `bit` away from `key` changes some output.
fn bit_is_observable(
    locked: &Netlist,
    functional: usize,
    key: &[bool],
    bit: usize,
    seed: u64,
) -> bool {
    let sim = Simulator::new(locked);
    let mut good = vec![0u64; sim.slot_count()];
    let mut bad = vec![0u64; sim.slot_count()];
    for (i, &b) in key.iter().enumerate() {
        let w = if b { u64::MAX } else { 0 };
        good[functional + i] = w;
        bad[functional + i] = if i == bit { !w } else { w };
    }
    let mut differs = |inputs: &[u64], mask: u64| -> bool {
        good[..functional].copy_from_slice(inputs);
        bad[..functional].copy_from_slice(inputs);
        sim.eval_words(&mut good);
        sim.eval_words(&mut bad);
        (0..sim.output_count())
            .any(|k| (sim.output_word(&good, k) ^ sim.output_word(&bad, k)) & mask != 0)
    };
    let mut words = vec![0u64; functional];
    if functional <= EXHAUSTIVE_INPUT_LIMIT {
        let total = 1usize << functional;
        let blocks = total.div_ceil(LANES);
        for b in 0..blocks {
            exhaustive_block(b, &mut words);
            if differs(&words, lane_mask(total - b * LANES)) {
                return true;
            }
        }
        false
    } else {
        let mut r = rng::seeded(seed);
        for _ in 0..CERTIFY_SAMPLES / LANES {
            for w in words.iter_mut() {
                *w = r.gen();
            }
            if differs(&words, u64::MAX) {
                return true;
            }
        }
        false
    }
}

/// Input words for exhaustive block `b`: lane `l` carries stimulus number
/// `64·b + l`, with input `i` taking bit `i` of that number.
pub(crate) fn exhaustive_block(b: usize, words: &mut [u64]) {
    const PATTERNS: [u64; 6] = [
        0xAAAA_AAAA_AAAA_AAAA,
        0xCCCC_CCCC_CCCC_CCCC,
        0xF0F0_F0F0_F0F0_F0F0,
        0xFF00_FF00_FF00_FF00,
        0xFFFF_0000_FFFF_0000,
        0xFFFF_FFFF_0000_0000,
    ];
    for (i, w) in words.iter_mut().enumerate() {
        *w = if i < 6 {
            PATTERNS[i]
        } else if (b >> (i - 6)) & 1 == 1 {
            u64::MAX
        } else {
            0
        };
    }
}

/// Binds the key, returning a netlist over the functional inputs only.
///
/// Constant key bits are folded into the gates they feed: XOR with 0 becomes
/// BUF, XOR with 1 becomes NOT (dually for XNOR); AND/NAND drop constant-1
/// fan-ins and OR/NOR drop constant-0 fan-ins. A fan-in value that would
/// force a gate constant is reported as [`LockError::ConstantSignal`].
pub fn apply_key(l: &LockedNetlist, k: &Key) -> Result<Netlist, LockError> {
    l.check_width(k)?;
    let functional = l.functional_inputs().to_vec();
    let key_value = |name: &str| -> Option<bool> {
        let idx: usize = name.strip_prefix(KEY_INPUT_PREFIX)?.parse().ok()?;
        (idx < k.width() && *name == key_input_name(idx)).then(|| k.bit(idx))
    };
    let mut gates = Vec::with_capacity(l.netlist().gate_count());
    for g in l.netlist().gates() {
        let mut signals: Vec<String> = Vec::new();
        let mut consts: Vec<bool> = Vec::new();
        for f in &g.fanin {
            match key_value(f) {
                Some(b) => consts.push(b),
                None => signals.push(f.clone()),
            }
        }
        if consts.is_empty() {
            gates.push(g.clone());
            continue;
        }
        let constant = || LockError::ConstantSignal(g.output.clone());
        let kind = match g.kind {
            GateKind::Xor | GateKind::Xnor => {
                if signals.len() != 1 {
                    return Err(constant());
                }
                let parity = consts.iter().fold(false, |a, &b| a ^ b);
                let invert = parity ^ (g.kind == GateKind::Xnor);
                if invert {
                    GateKind::Not
                } else {
                    GateKind::Buf
                }
            }
            GateKind::And | GateKind::Nand | GateKind::Or | GateKind::Nor => {
                let absorbing = matches!(g.kind, GateKind::Or | GateKind::Nor);
                if consts.contains(&absorbing) || signals.is_empty() {
                    return Err(constant());
                }
                if signals.len() >= 2 {
                    g.kind
                } else if matches!(g.kind, GateKind::And | GateKind::Or) {
                    GateKind::Buf
                } else {
                    GateKind::Not
                }
            }
            GateKind::Not | GateKind::Buf => return Err(constant()),
        };
        gates.push(Gate {
            output: g.output.clone(),
            kind,
            fanin: signals,
        });
    }
    for o in l.netlist().outputs() {
        if key_value(o).is_some() {
            return Err(LockError::ConstantSignal(o.clone()));
        }
    }
    Ok(Netlist::new(
        l.netlist().name(),
        functional,
        l.netlist().outputs().to_vec(),
        gates,
    )?)
}

/// Outcome of [`equiv_check`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Equivalence {
    /// Equal on every input vector.
    ExhaustiveEqual,
    /// Equal on this many random vectors.
    SampledEqual(usize),
    /// A stimulus on which the outputs differ.
    Counterexample(BitVector),
}

impl Equivalence {
    pub fn is_equal(&self) -> bool {
        !matches!(self, Equivalence::Counterexample(_))
    }
}

/// Compares two netlists with identical pin lists: exhaustively up to
/// [`EXHAUSTIVE_INPUT_LIMIT`] inputs, otherwise on `budget` seeded random
/// vectors.
pub fn equiv_check(
    a: &Netlist,
    b: &Netlist,
    budget: usize,
    seed: u64,
) -> Result<Equivalence, LockError> {
    if !a.same_signature(b) {
        return Err(LockError::SignatureMismatch);
    }
    let sa = Simulator::new(a);
    let sb = Simulator::new(b);
    let n = a.input_count();
    let mut va = vec![0u64; sa.slot_count()];
    let mut vb = vec![0u64; sb.slot_count()];
    let mut words = vec![0u64; n];
    let mut first_diff = |words: &[u64], mask: u64| -> Option<usize> {
        va[..n].copy_from_slice(words);
        vb[..n].copy_from_slice(words);
        sa.eval_words(&mut va);
        sb.eval_words(&mut vb);
        let mut diff = 0u64;
        for k in 0..sa.output_count() {
            diff |= sa.output_word(&va, k) ^ sb.output_word(&vb, k);
        }
        let diff = diff & mask;
        (diff != 0).then(|| diff.trailing_zeros() as usize)
    };
    let lane_vector = |words: &[u64], lane: usize| -> BitVector {
        let bits: Vec<bool> = words.iter().map(|w| (w >> lane) & 1 == 1).collect();
        BitVector::from_bools(&bits)
    };

    if n <= EXHAUSTIVE_INPUT_LIMIT {
        let total = 1usize << n;
        for blk in 0..total.div_ceil(LANES) {
            exhaustive_block(blk, &mut words);
            if let Some(lane) = first_diff(&words, lane_mask(total - blk * LANES)) {
                return Ok(Equivalence::Counterexample(lane_vector(&words, lane)));
            }
        }
        return Ok(Equivalence::ExhaustiveEqual);
    }
    let mut r = rng::seeded(seed);
    let mut done = 0;
    while done < budget {
        let take = (budget - done).min(LANES);
        for w in words.iter_mut() {
            *w = r.gen();
        }
        if let Some(lane) = first_diff(&words, lane_mask(take)) {
            return Ok(Equivalence::Counterexample(lane_vector(&words, lane)));
        }
        done += take;
    }
    Ok(Equivalence::SampledEqual(budget))
}
