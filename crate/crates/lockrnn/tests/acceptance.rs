//! The eight acceptance criteria. Each test prints one `[PASS]`/`[FAIL]`
//! line to stderr (bypassing the harness's output capture) and then asserts.
//! A shared lock runs them one at a time so that wall-clock limits are not
//! distorted by sibling tests competing for cores.

use std::collections::HashMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use lockrnn::fixtures;
use lockrnn::io;
use lockrnn::sweep::{self, SweepAxis, SweepBase, SweepSpec};
use lockrnn_core::attacks::{attack_key, score_key, KeyAttackConfig, OracleBudget, ThreatModel};
use lockrnn_core::bits::BitVector;
use lockrnn_core::drnn::{
    batch_gradients, dataset_mse, step, Dataset, ForwardCache, Gradients, LstmNetwork, NetShape,
    TrainerState, DEFAULT_LEARNING_RATE, DEFAULT_MOMENTUM,
};
use lockrnn_core::locking::{apply_key, Key, LockedNetlist};
use lockrnn_core::netlist::{Gate, GateKind, Netlist};
use lockrnn_core::rng;
use lockrnn_core::simulator::{brute_force_keys, evaluate, evaluate_batch, gen_io_table};
use rand::Rng;

static SERIAL: Mutex<()> = Mutex::new(());

fn verdict(id: u32, title: &str, pass: bool, elapsed: Duration, detail: &str) {
    let line = format!(
        "[{}] C{id} {title}: {detail} ({:.2} s)\n",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "C{id} failed: {detail}");
}

fn serial() -> std::sync::MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|e| e.into_inner())
}

fn fixture(name: &str) -> PathBuf {
    fixtures::dir().join(name)
}

fn locked_fixture(bench: &str, key: &str) -> (LockedNetlist, Key) {
    let l = LockedNetlist::from_netlist(io::read_netlist(&fixture(bench)).unwrap()).unwrap();
    (l, io::read_key(&fixture(key)).unwrap())
}

#[test]
fn c1_locking_correctness() {
    let _g = serial();
    let t = Instant::now();
    let original = io::read_netlist(&fixture("c17.bench")).unwrap();
    let (locked, key) = locked_fixture("c17_k4.bench", "c17_k4.key");
    let stimuli: Vec<BitVector> = (0..32u64).map(|v| BitVector::from_u64(v, 5)).collect();
    let want = evaluate_batch(&original, &stimuli).unwrap();
    let run = |k: &Key| -> Vec<BitVector> {
        stimuli
            .iter()
            .map(|x| evaluate(locked.netlist(), &x.concat(k.bits())).unwrap())
            .collect()
    };
    let equivalent = run(&key) == want;
    let corrupting: Vec<usize> = (0..key.width())
        .map(|b| run(&key.with_flipped(b)).iter().zip(&want).filter(|(a, w)| a != w).count())
        .collect();
    let elapsed = t.elapsed();
    let pass = key.width() == 4
        && equivalent
        && corrupting.iter().all(|&c| c >= 1)
        && elapsed < Duration::from_secs(1);
    verdict(
        1,
        "locking correctness",
        pass,
        elapsed,
        &format!("equivalent under key: {equivalent}; corrupted stimuli per flipped bit {corrupting:?}"),
    );
}

/// Scalar reference evaluation, independent of the library's simulator.
fn recursive_eval(n: &Netlist, x: &BitVector) -> Vec<bool> {
    fn truth(kind: GateKind, args: &[bool]) -> bool {
        let ones = args.iter().filter(|&&b| b).count();
        match kind {
            GateKind::And => ones == args.len(),
            GateKind::Nand => ones != args.len(),
            GateKind::Or => ones > 0,
            GateKind::Nor => ones == 0,
            GateKind::Xor => ones % 2 == 1,
            GateKind::Xnor => ones % 2 == 0,
            GateKind::Not => !args[0],
            GateKind::Buf => args[0],
        }
    }
    fn go<'a>(s: &'a str, gates: &HashMap<&'a str, &'a Gate>, memo: &mut HashMap<&'a str, bool>) -> bool {
        if let Some(&v) = memo.get(s) {
            return v;
        }
        let g = gates[s];
        let args: Vec<bool> = g.fanin.iter().map(|f| go(f, gates, memo)).collect();
        let v = truth(g.kind, &args);
        memo.insert(s, v);
        v
    }
    let gates: HashMap<&str, &Gate> = n.gates().iter().map(|g| (g.output.as_str(), g)).collect();
    let mut memo: HashMap<&str, bool> =
        n.inputs().iter().map(String::as_str).zip(x.iter()).collect();
    n.outputs().iter().map(|o| go(o, &gates, &mut memo)).collect()
}

#[test]
fn c2_simulator_oracle_agreement() {
    let _g = serial();
    let t = Instant::now();
    let mut mismatches = Vec::new();
    let mut checked = 0;
    let benches: Vec<String> = fixtures::all_files()
        .into_iter()
        .map(|(name, _)| name)
        .filter(|name| name.ends_with(".bench"))
        .collect();
    for name in &benches {
        let n = io::read_netlist(&fixture(name)).unwrap();
        let mut r = rng::seeded(checked as u64 + 1);
        let xs: Vec<BitVector> =
            (0..10_000).map(|_| BitVector::random(&mut r, n.input_count())).collect();
        let fast = evaluate_batch(&n, &xs).unwrap();
        let bad = xs
            .iter()
            .zip(&fast)
            .filter(|(x, y)| recursive_eval(&n, x) != y.to_bools())
            .count();
        if bad > 0 {
            mismatches.push(format!("{name}: {bad}"));
        }
        checked += 1;
    }
    let elapsed = t.elapsed();
    let pass = mismatches.is_empty() && checked == benches.len() && elapsed < Duration::from_secs(10);
    verdict(
        2,
        "simulator oracle agreement",
        pass,
        elapsed,
        &format!("{checked} fixtures x 10^4 vectors, mismatches {mismatches:?}"),
    );
}

fn network_loss(net: &LstmNetwork, xs: &[Vec<f64>], ds: &[Vec<f64>], cache: &mut ForwardCache) -> f64 {
    net.forward_batch(xs, cache).unwrap();
    (0..xs.len())
        .map(|b| cache.output(b).iter().zip(&ds[b]).map(|(z, d)| (z - d) * (z - d)).sum::<f64>())
        .sum()
}

#[test]
fn c3_gradient_fidelity() {
    let _g = serial();
    let t = Instant::now();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let mut r = rng::seeded(seed + 77);
        let chunk = r.gen_range(1..=4);
        let steps = r.gen_range(1..=3);
        let bits = r.gen_range((steps - 1) * chunk + 1..=steps * chunk);
        let hidden: Vec<usize> = (0..r.gen_range(1..=2)).map(|_| r.gen_range(1..=4)).collect();
        let outputs = r.gen_range(1..=3);
        let mut net = LstmNetwork::new(NetShape::new(bits, outputs, &hidden, chunk), seed).unwrap();
        for p in net.params_mut() {
            *p = r.gen_range(-1.0..1.0);
        }
        let batch = r.gen_range(1..=3);
        let xs: Vec<Vec<f64>> = (0..batch)
            .map(|_| (0..bits).map(|_| f64::from(r.gen_range(0..2u8))).collect())
            .collect();
        let ds: Vec<Vec<f64>> = (0..batch)
            .map(|_| (0..outputs).map(|_| f64::from(r.gen_range(0..2u8))).collect())
            .collect();
        let mut cache = ForwardCache::new(&net);
        let mut grads = Gradients::zeros_like(&net);
        batch_gradients(&net, &xs, &ds, None, &mut cache, &mut grads).unwrap();
        let analytic = grads.as_slice().to_vec();
        for (i, &g) in analytic.iter().enumerate() {
            let orig = net.params()[i];
            net.params_mut()[i] = orig + h;
            let up = network_loss(&net, &xs, &ds, &mut cache);
            net.params_mut()[i] = orig - h;
            let down = network_loss(&net, &xs, &ds, &mut cache);
            net.params_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            worst = worst.max((g - numeric).abs() / g.abs().max(numeric.abs()).max(1e-6));
        }
    }
    let elapsed = t.elapsed();
    let pass = worst < 1e-4 && elapsed < Duration::from_secs(60);
    verdict(
        3,
        "gradient fidelity",
        pass,
        elapsed,
        &format!("100 instances, max relative error {worst:.3e}"),
    );
}

#[test]
fn c4_memorization() {
    let _g = serial();
    let t = Instant::now();
    let mut r = rng::seeded(2024);
    let data = Dataset {
        inputs: (0..64u32)
            .map(|v| (0..6).map(|i| f64::from((v >> i) & 1)).collect())
            .collect(),
        targets: (0..64)
            .map(|_| (0..4).map(|_| f64::from(r.gen_range(0..2u8))).collect())
            .collect(),
    };
    let mut net = LstmNetwork::new(NetShape::new(6, 4, &[128, 128], 8), 11).unwrap();
    let batch = 8;
    let mut state = TrainerState::new(&net, DEFAULT_LEARNING_RATE, DEFAULT_MOMENTUM, batch);
    let mut cache = ForwardCache::new(&net);
    let mut grads = Gradients::zeros_like(&net);
    let mut order: Vec<usize> = (0..64).collect();
    let mut shuffle_rng = rng::seeded(7);
    let mut reached = None;
    let mut mse = dataset_mse(&net, &data, &mut cache).unwrap();
    for epoch in 1..=5000 {
        state.epoch = epoch;
        rng::shuffle(&mut shuffle_rng, &mut order);
        for chunk in order.chunks(batch) {
            let xs: Vec<&[f64]> = chunk.iter().map(|&i| data.inputs[i].as_slice()).collect();
            let ys: Vec<&[f64]> = chunk.iter().map(|&i| data.targets[i].as_slice()).collect();
            batch_gradients(&net, &xs, &ys, None, &mut cache, &mut grads).unwrap();
            step(&mut net, &mut state, &grads);
        }
        mse = dataset_mse(&net, &data, &mut cache).unwrap();
        if mse < 1e-2 {
            reached = Some(epoch);
            break;
        }
    }
    let elapsed = t.elapsed();
    let pass = reached.is_some() && elapsed < Duration::from_secs(120);
    verdict(
        4,
        "memorization",
        pass,
        elapsed,
        &format!("2x128 hidden, eta {DEFAULT_LEARNING_RATE}, alpha {DEFAULT_MOMENTUM}: train MSE {mse:.2e} at epoch {reached:?}"),
    );
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len().is_multiple_of(2) {
        (v[m - 1] + v[m]) / 2.0
    } else {
        v[m]
    }
}

#[test]
fn c5_key_attack_vs_exact_oracle() {
    let _g = serial();
    let t = Instant::now();
    let (locked, key) = locked_fixture("rand200_k8.bench", "rand200_k8.key");
    let activated = apply_key(&locked, &key).unwrap();
    let mut in_set = 0;
    let mut beats = 0;
    let mut trials = Vec::new();
    for trial in 0..10u64 {
        let oracle = gen_io_table(&activated, 512, 1000 + trial).unwrap();
        let exact: Vec<Key> = brute_force_keys(&locked, &oracle)
            .unwrap()
            .into_iter()
            .filter(|s| s.match_rate == 1.0)
            .map(|s| s.key)
            .collect();
        let tm = ThreatModel::new(&locked, oracle, OracleBudget::Fraction(0.005)).unwrap();
        let cfg = KeyAttackConfig {
            seed: trial,
            ..KeyAttackConfig::default()
        };
        assert_eq!(cfg.optimize.restarts, 8);
        let report = attack_key(&tm, &cfg).unwrap();
        let found = report.recovered_key().unwrap();
        let held_out = gen_io_table(&activated, 4096, 5000 + trial).unwrap();
        let rate = score_key(&locked, &found, &held_out).unwrap();
        let mut r = rng::seeded(9000 + trial);
        let random_rates: Vec<f64> = (0..64)
            .map(|_| {
                let k = Key::new(BitVector::random(&mut r, key.width()));
                score_key(&locked, &k, &held_out).unwrap()
            })
            .collect();
        let med = median(random_rates);
        let hit = exact.contains(&found);
        in_set += usize::from(hit);
        beats += usize::from(rate > med);
        trials.push(format!("{}{}", found.bits(), if hit { "*" } else { "" }));
    }
    let elapsed = t.elapsed();
    let pass = in_set >= 8 && beats == 10 && elapsed < Duration::from_secs(600);
    verdict(
        5,
        "key attack vs exact oracle",
        pass,
        elapsed,
        &format!("{in_set}/10 in the rate-1.0 set, {beats}/10 beat the random-key median; keys {trials:?}"),
    );
}

#[test]
fn c6_training_size_sweep_shape() {
    let _g = serial();
    let t = Instant::now();
    let (locked, key) = locked_fixture("rand200_k8.bench", "rand200_k8.key");
    let spec = SweepSpec {
        axis: SweepAxis::Layers,
        points: vec![64.0, 128.0, 256.0, 512.0],
        repetitions: 5,
        seed_base: 0,
    };
    let base = SweepBase {
        locked: locked.with_correct_key(key).unwrap(),
        attack: KeyAttackConfig::default(),
        oracle_rows: 512,
        eval_rows: 2048,
        budget: OracleBudget::Fraction(0.005),
        workers: sweep::default_workers(),
    };
    let result = sweep::run_sweep(&spec, &base).unwrap();
    let curve = |layers: usize| -> Vec<f64> {
        result
            .summary
            .iter()
            .filter(|p| p.layers == layers)
            .map(|p| p.mean_success.unwrap_or(0.0))
            .collect()
    };
    let (one, two) = (curve(1), curve(2));
    let failures: usize = result.summary.iter().map(|p| p.failures).sum();
    let monotone = sweep::is_monotone_with_tolerance(&two, 0.05);
    let deeper_wins = two[3] >= one[3] - 0.05;
    let elapsed = t.elapsed();
    let pass = failures == 0 && monotone && deeper_wins && elapsed < Duration::from_secs(1800);
    verdict(
        6,
        "training-size sweep shape",
        pass,
        elapsed,
        &format!("2HL mean success {two:.3?} (monotone within 0.05: {monotone}); 1HL {one:.3?}; failed cells {failures}"),
    );
}

fn lockrnn(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_lockrnn")).args(args).output().unwrap()
}

fn run_ok(args: &[&str]) {
    let out = lockrnn(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn c7_output_and_input_prediction_sanity() {
    let _g = serial();
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let mut notes = Vec::new();
    let mut pass = true;
    for (bench, seed) in [("identity8.bench", "1"), ("invbank8.bench", "2")] {
        let table = dir.path().join(format!("{bench}.csv"));
        run_ok(&["gendata", "--netlist", p(&fixture(bench)), "--count", "1024", "--seed", seed, "--out", p(&table)]);
        for mode in ["attack-output", "attack-input"] {
            let report = dir.path().join(format!("{bench}.{mode}.json"));
            let pins = dir.path().join(format!("{bench}.{mode}.pins.csv"));
            run_ok(&[
                mode, "--netlist", p(&fixture(bench)), "--table", p(&table),
                "--train-rows", "512", "--budget-rows", "512",
                "--report-out", p(&report), "--pins-out", p(&pins),
            ]);
            let json: serde_json::Value = io::read_json(&report).unwrap();
            let result = &json["result"];
            let acc = result["bit_accuracy"].as_f64().unwrap();
            let rows = io::read_pins_csv(&pins).unwrap();
            let pins_json = result["pins"].as_array().unwrap();
            let one_per_pin = rows.len() == 8
                && rows.iter().enumerate().all(|(i, r)| r.pin_index == i)
                && rows.iter().zip(pins_json).all(|(r, j)| {
                    j["real_avg"].as_f64() == Some(r.real_avg)
                        && j["predicted_avg"].as_f64() == Some(r.predicted_avg)
                });
            pass &= acc >= 0.99 && one_per_pin && result["holdout_rows"] == 512;
            notes.push(format!("{bench} {mode}: accuracy {acc:.4}, {} pin rows", rows.len()));
        }
    }
    let elapsed = t.elapsed();
    pass &= elapsed < Duration::from_secs(300);
    verdict(7, "output/input prediction sanity", pass, elapsed, &notes.join("; "));
}

#[test]
fn c8_reproducibility() {
    let _g = serial();
    let t = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let d = |n: &str| dir.path().join(n);
    let rand = fixture("rand200_k8.bench");
    let rkey = fixture("rand200_k8.key");
    run_ok(&["gendata", "--netlist", p(&rand), "--key", p(&rkey), "--count", "512", "--seed", "4", "--out", p(&d("o.csv"))]);
    run_ok(&["gendata", "--netlist", p(&fixture("identity8.bench")), "--count", "600", "--seed", "4", "--out", p(&d("id.csv"))]);
    let quick_key = [
        "--surrogate-rows", "2048", "--surrogate-epochs", "5", "--surrogate-hidden", "16",
        "--restarts", "2", "--key-epochs", "30",
    ];
    run_ok(&[
        &[
            "attack-key", "--locked", p(&rand), "--table", p(&d("o.csv")), "--true-key", p(&rkey),
            "--seed", "5", "--report-out", p(&d("key.json")),
        ][..],
        &quick_key,
    ]
    .concat());
    run_ok(&[
        "attack-output", "--netlist", p(&fixture("identity8.bench")), "--table", p(&d("id.csv")),
        "--train-rows", "400", "--budget-rows", "400", "--hidden", "16", "--epochs", "20",
        "--report-out", p(&d("out.json")),
    ]);
    run_ok(&["train", "--table", p(&d("id.csv")), "--hidden", "8", "--layers", "1", "--epochs", "15", "--report-out", p(&d("train.json"))]);
    run_ok(&[
        &[
            "sweep", "--axis", "momentum", "--points", "0.5,0.9", "--repetitions", "1",
            "--locked", p(&rand), "--true-key", p(&rkey), "--oracle-rows", "256", "--eval-rows", "256",
            "--out", p(&d("sweep.csv")), "--summary-out", p(&d("sweep.json")),
        ][..],
        &quick_key,
    ]
    .concat());

    let mut notes = Vec::new();
    let mut pass = true;
    for name in ["key.json", "out.json", "train.json", "sweep.json"] {
        let out = lockrnn(&["replay", "--report", p(&d(name))]);
        pass &= out.status.success();
        notes.push(format!("{name}: exit {}", out.status.code().unwrap_or(-1)));
    }
    // A tampered metric must be caught, or the comparison proves nothing.
    let mut tampered: serde_json::Value = io::read_json(&d("key.json")).unwrap();
    let rate = tampered["result"]["match_rate"].as_f64().unwrap();
    tampered["result"]["match_rate"] = serde_json::json!(rate + f64::EPSILON.max(rate * f64::EPSILON));
    io::write_json(&d("tampered.json"), &tampered).unwrap();
    let caught = lockrnn(&["replay", "--report", p(&d("tampered.json"))]).status.code() == Some(6);
    pass &= caught;
    notes.push(format!("one-ulp tamper detected: {caught}"));
    verdict(8, "reproducibility", pass, t.elapsed(), &notes.join("; "));
}
