use lockrnn_core::attacks::{
    attack_input, attack_key, attack_output, score_key, AttackError, KeyAttackConfig,
    KeyOptConfig, OracleBudget, PredictConfig, SurrogateConfig, ThreatModel,
};
use lockrnn_core::bits::BitVector;
use lockrnn_core::drnn::TrainConfig;
use lockrnn_core::locking::{apply_key, lock_random, Key, LockedNetlist};
use lockrnn_core::netlist::random::{random_dag, DagShape};
use lockrnn_core::netlist::{Gate, GateKind, Netlist};
use lockrnn_core::simulator::{brute_force_keys, gen_io_table, IoTable};

fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn plain(n: Netlist) -> LockedNetlist {
    LockedNetlist::from_netlist(n).unwrap()
}

fn small_predict(train_rows: usize, hidden: usize) -> PredictConfig {
    PredictConfig {
        train_rows,
        hidden: vec![hidden],
        chunk_width: 8,
        train: TrainConfig {
            max_epochs: 300,
            patience: 40,
            batch_size: 8,
            ..TrainConfig::default()
        },
        seed: 1,
    }
}

#[test]
fn threat_model_hides_key_and_enforces_budget() {
    let n = random_dag(&DagShape::new(10, 50, 3), 4);
    let (l, k) = lock_random(&n, 4, 4).unwrap();
    let oracle = gen_io_table(&apply_key(&l, &k).unwrap(), 100, 1).unwrap();
    let tm = ThreatModel::new(&l.clone().with_correct_key(k).unwrap(), oracle.clone(), OracleBudget::Rows(100)).unwrap();
    assert!(tm.locked().correct_key().is_none());
    // 0.5% of 1024 stimuli allows 5 rows.
    assert_eq!(OracleBudget::Fraction(0.005).allowed(10), 5);
    let tight = ThreatModel::new(&l, oracle.clone(), OracleBudget::Fraction(0.005)).unwrap();
    let err = attack_key(&tight, &KeyAttackConfig::default()).unwrap_err();
    assert!(matches!(err, AttackError::BudgetExceeded { used: 100, allowed: 5 }), "{err:?}");
    let foreign = gen_io_table(&random_dag(&DagShape::new(9, 50, 3), 4), 10, 1).unwrap();
    assert!(ThreatModel::new(&l, foreign, OracleBudget::Rows(10)).is_err());
}

#[test]
fn correct_key_scores_one() {
    let n = random_dag(&DagShape::new(12, 90, 5), 8);
    let (l, k) = lock_random(&n, 8, 8).unwrap();
    let oracle = gen_io_table(&n, 300, 2).unwrap();
    assert_eq!(score_key(&l, &k, &oracle).unwrap(), 1.0);
    let rates = brute_force_keys(&l, &oracle).unwrap();
    for s in rates.iter().take(20) {
        assert_eq!(score_key(&l, &s.key, &oracle).unwrap(), s.match_rate);
    }
}

/// Inverting a 2-input AND: when y=0 each input is 1 with probability 1/3,
/// so the best thresholded guess is 00 and the optimal bit accuracy is
/// 1/4 * 1 + 3/4 * 2/3 = 0.75. Whole rows are right for y=1 and for the
/// third of y=0 rows that really are 00, so 0.5.
#[test]
fn and_gate_inversion_reaches_bayes_rate() {
    let and2 = Netlist::new(
        "and2",
        names("a", 2),
        vec!["y".into()],
        vec![Gate::new("y", GateKind::And, &["a0", "a1"])],
    )
    .unwrap();
    let rows: Vec<(BitVector, BitVector)> = (0..512u64)
        .map(|i| {
            let x = BitVector::from_u64(i % 4, 2);
            let y = BitVector::from_bools(&[i % 4 == 3]);
            (x, y)
        })
        .collect();
    let oracle = IoTable::new(names("a", 2), vec!["y".into()], rows, None, "and2").unwrap();
    let tm = ThreatModel::new(&plain(and2), oracle, OracleBudget::Rows(256)).unwrap();
    let r = attack_input(&tm, &small_predict(256, 8)).unwrap();
    assert_eq!(r.holdout_rows, 256);
    assert_eq!(r.bit_accuracy, Some(0.75));
    assert_eq!(r.match_rate, 0.5);
    assert_eq!(r.pins.len(), 2);
    for p in &r.pins {
        assert_eq!(p.real_avg, 0.5);
        assert_eq!(p.predicted_avg, 0.25);
    }
}

#[test]
fn constant_pin_is_predicted_constant() {
    let n = Netlist::new(
        "const",
        names("x", 3),
        names("y", 2),
        vec![
            Gate::new("y0", GateKind::Xor, &["x0", "x2"]),
            Gate::new("nx1", GateKind::Not, &["x1"]),
            Gate::new("y1", GateKind::And, &["x1", "nx1"]),
        ],
    )
    .unwrap();
    let oracle = gen_io_table(&n, 400, 6).unwrap();
    let tm = ThreatModel::new(&plain(n), oracle, OracleBudget::Rows(300)).unwrap();
    let r = attack_output(&tm, &small_predict(300, 16)).unwrap();
    assert_eq!(r.pins[1].real_avg, 0.0);
    assert_eq!(r.pins[1].predicted_avg, 0.0);
    assert_eq!(r.pins[1].accuracy, 1.0);
    assert_eq!(r.pins[0].name, "y0");
}

#[test]
fn key_attack_report_is_consistent_with_exact_scoring() {
    let n = random_dag(&DagShape::new(9, 40, 4), 21);
    let (l, k) = lock_random(&n, 4, 21).unwrap();
    let oracle = gen_io_table(&n, 256, 5).unwrap();
    let tm = ThreatModel::new(&l, oracle.clone(), OracleBudget::Rows(256)).unwrap();
    let cfg = KeyAttackConfig {
        surrogate: SurrogateConfig {
            rows: 1024,
            hidden: vec![16],
            train: TrainConfig {
                max_epochs: 10,
                batch_size: 8,
                ..SurrogateConfig::default().train
            },
            ..SurrogateConfig::default()
        },
        optimize: KeyOptConfig {
            restarts: 3,
            epochs: 40,
            ..KeyOptConfig::default()
        },
        seed: 3,
        ..KeyAttackConfig::default()
    };
    let r = attack_key(&tm, &cfg).unwrap().with_key_truth(&k).unwrap();
    assert_eq!(r.restarts.len(), 3);
    assert_eq!(r.holdout_rows, 64);
    let best = r
        .restarts
        .iter()
        .map(|o| o.holdout_match_rate)
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(r.match_rate, best);
    let key = Key::parse01(r.key.as_deref().unwrap()).unwrap();
    let full = score_key(&l, &key, &oracle).unwrap();
    let brute = brute_force_keys(&l, &oracle).unwrap();
    assert_eq!(brute.iter().find(|s| s.key == key).unwrap().match_rate, full);
    assert_eq!(r.key_bit_match, Some(key.bit_agreement(&k)));
    assert!(r.oracle_rows_used <= 256);

    let again = attack_key(&tm, &cfg).unwrap().with_key_truth(&k).unwrap();
    assert_eq!(again.key, r.key);
    assert_eq!(again.restarts, r.restarts);
}
