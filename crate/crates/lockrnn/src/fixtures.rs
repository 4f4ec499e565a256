//! Shipped benchmark circuits and how they were produced.
//!
//! `fixtures/` holds the `.bench` and key files written by
//! `cargo run -p lockrnn --example make_fixtures`; a test checks that the
//! files match what the functions here generate.

use std::path::PathBuf;

use lockrnn_core::locking::{lock_random, Key, LockedNetlist};
use lockrnn_core::netlist::random::{random_dag, DagShape};
use lockrnn_core::netlist::{parse_bench, Gate, GateKind, Netlist};
use lockrnn_core::simulator::Simulator;

pub const C17_BENCH: &str = "\
# c17
INPUT(1)
INPUT(2)
INPUT(3)
INPUT(6)
INPUT(7)
OUTPUT(22)
OUTPUT(23)
10 = NAND(1, 3)
11 = NAND(3, 6)
16 = NAND(2, 11)
19 = NAND(11, 7)
22 = NAND(10, 16)
23 = NAND(16, 19)
";

/// Lock seed of the 4-bit c17 fixture.
pub const C17_LOCK_SEED: u64 = 7;

/// Inputs, gates and outputs of the random-DAG attack fixture. Seventeen
/// inputs keep 512 oracle rows within a 0.5% budget (655 rows).
pub const RAND_DAG_INPUTS: usize = 17;
pub const RAND_DAG_GATES: usize = 200;
pub const RAND_DAG_OUTPUTS: usize = 8;
pub const RAND_DAG_SEED: u64 = 1;
pub const RAND_DAG_KEY_WIDTH: usize = 8;

/// Every key bit of the attack fixture must corrupt at least this fraction
/// of all stimuli when flipped alone.
pub const MIN_KEY_OBSERVABILITY: f64 = 0.05;

pub fn dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

pub fn c17() -> Netlist {
    parse_bench(C17_BENCH, "c17").expect("valid c17")
}

pub fn c17_locked() -> (LockedNetlist, Key) {
    lock_random(&c17(), 4, C17_LOCK_SEED).expect("c17 has enough wires")
}

pub fn rand_dag() -> Netlist {
    let shape = DagShape::new(RAND_DAG_INPUTS, RAND_DAG_GATES, RAND_DAG_OUTPUTS);
    random_dag(&shape, RAND_DAG_SEED).with_name("rand200")
}

/// The first lock seed (counting from 1) whose key bits all pass
/// [`MIN_KEY_OBSERVABILITY`], with the locked netlist and key.
pub fn rand_dag_locked() -> (LockedNetlist, Key, u64) {
    let n = rand_dag();
    for seed in 1.. {
        let (locked, key) = lock_random(&n, RAND_DAG_KEY_WIDTH, seed).expect("enough wires");
        let obs = key_observability(&locked, &key);
        if obs.iter().all(|&o| o >= MIN_KEY_OBSERVABILITY) {
            return (locked, key, seed);
        }
    }
    unreachable!()
}

/// For each key bit, the fraction of all functional stimuli on which
/// flipping that bit alone changes some output. Exhaustive; intended for
/// circuits with at most 24 functional inputs.
pub fn key_observability(locked: &LockedNetlist, key: &Key) -> Vec<f64> {
    let n = locked.functional_inputs().len();
    assert!(n <= 24, "exhaustive observability needs at most 24 inputs");
    let kw = key.width();
    let sim = Simulator::new(locked.netlist());
    let outs = sim.output_count();
    let mut values = vec![0u64; sim.slot_count()];
    let mut base = vec![0u64; outs];
    let mut hits = vec![0u64; kw];
    let total = 1u64 << n;
    let blocks = total.div_ceil(64);
    for blk in 0..blocks {
        let lanes = (total - blk * 64).min(64);
        let mask = if lanes == 64 { u64::MAX } else { (1u64 << lanes) - 1 };
        for (i, v) in values.iter_mut().take(n).enumerate() {
            let mut w = 0u64;
            for l in 0..lanes {
                if ((blk * 64 + l) >> i) & 1 == 1 {
                    w |= 1 << l;
                }
            }
            *v = w;
        }
        for b in 0..kw {
            values[n + b] = if key.bit(b) { u64::MAX } else { 0 };
        }
        sim.eval_words(&mut values);
        for (q, slot) in base.iter_mut().enumerate() {
            *slot = sim.output_word(&values, q);
        }
        for (b, hit) in hits.iter_mut().enumerate() {
            values[n + b] = !values[n + b];
            sim.eval_words(&mut values);
            let mut diff = 0u64;
            for (q, want) in base.iter().enumerate() {
                diff |= sim.output_word(&values, q) ^ want;
            }
            *hit += (diff & mask).count_ones() as u64;
            values[n + b] = !values[n + b];
        }
    }
    hits.iter().map(|&h| h as f64 / total as f64).collect()
}

fn pinwise(name: &str, width: usize, kind: GateKind) -> Netlist {
    let inputs: Vec<String> = (0..width).map(|i| format!("x{i}")).collect();
    let outputs: Vec<String> = (0..width).map(|i| format!("y{i}")).collect();
    let gates = (0..width)
        .map(|i| Gate::new(&outputs[i], kind, &[inputs[i].as_str()]))
        .collect();
    Netlist::new(name, inputs, outputs, gates).expect("valid pinwise netlist")
}

/// `y_i = x_i` over eight wires.
pub fn identity8() -> Netlist {
    pinwise("identity8", 8, GateKind::Buf)
}

/// `y_i = NOT x_i` over eight wires.
pub fn inverter_bank8() -> Netlist {
    pinwise("invbank8", 8, GateKind::Not)
}

pub fn and2() -> Netlist {
    Netlist::new(
        "and2",
        vec!["a".into(), "b".into()],
        vec!["y".into()],
        vec![Gate::new("y", GateKind::And, &["a", "b"])],
    )
    .expect("valid and2")
}

/// Every shipped fixture as (file name, contents).
pub fn all_files() -> Vec<(String, String)> {
    use lockrnn_core::netlist::serialize_bench;
    let (c17l, c17k) = c17_locked();
    let (rl, rk, _) = rand_dag_locked();
    vec![
        ("c17.bench".into(), serialize_bench(&c17())),
        ("c17_k4.bench".into(), serialize_bench(&c17l.netlist().clone().with_name("c17_k4"))),
        ("c17_k4.key".into(), format!("{}\n", c17k.bits().to_string01())),
        ("rand200.bench".into(), serialize_bench(&rand_dag())),
        ("rand200_k8.bench".into(), serialize_bench(&rl.netlist().clone().with_name("rand200_k8"))),
        ("rand200_k8.key".into(), format!("{}\n", rk.bits().to_string01())),
        ("identity8.bench".into(), serialize_bench(&identity8())),
        ("invbank8.bench".into(), serialize_bench(&inverter_bank8())),
        ("and2.bench".into(), serialize_bench(&and2())),
    ]
}
