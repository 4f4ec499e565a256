//! Key-free guessing: learn outputs from inputs, or inputs from outputs.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{
    mean, AttackConfigEcho, AttackError, AttackMode, AttackReport, PinAverage, ThreatModel,
    TrainingSummary,
};
use crate::bits::BitVector;
use crate::drnn::{train, ForwardCache, LstmNetwork, NetShape, TrainConfig};
use crate::simulator::IoTable;

pub const PREDICT_PROCEDURE: &str = "direct-regression-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictConfig {
    /// Leading oracle rows used for training; the rest are held out.
    pub train_rows: usize,
    pub hidden: Vec<usize>,
    pub chunk_width: usize,
    pub train: TrainConfig,
    /// Weight initialization seed.
    pub seed: u64,
}

impl Default for PredictConfig {
    fn default() -> Self {
        Self {
            train_rows: 512,
            hidden: vec![128, 128],
            chunk_width: 8,
            train: TrainConfig::default(),
            seed: 0,
        }
    }
}

/// Trains `inputs → outputs` on the leading rows and evaluates the rest.
pub fn attack_output(tm: &ThreatModel, cfg: &PredictConfig) -> Result<AttackReport, AttackError> {
    let mut report = regress(tm, tm.oracle().clone(), cfg)?;
    report.config = AttackConfigEcho::Output(cfg.clone());
    Ok(report)
}

/// Trains `outputs → inputs` on the leading rows and evaluates the rest.
pub fn attack_input(tm: &ThreatModel, cfg: &PredictConfig) -> Result<AttackReport, AttackError> {
    let mut report = regress(tm, tm.oracle().transposed(), cfg)?;
    report.mode = AttackMode::Input;
    report.config = AttackConfigEcho::Input(cfg.clone());
    Ok(report)
}

fn regress(tm: &ThreatModel, table: IoTable, cfg: &PredictConfig) -> Result<AttackReport, AttackError> {
    if cfg.train_rows == 0 || cfg.train_rows >= table.len() {
        return Err(AttackError::OracleTooSmall {
            needed: cfg.train_rows.max(1) + 1,
            found: table.len(),
        });
    }
    tm.charge(cfg.train_rows)?;
    let (train_t, test_t) = table.split_at(cfg.train_rows);
    let shape = NetShape::new(table.input_width(), table.output_width(), &cfg.hidden, cfg.chunk_width);
    let net = LstmNetwork::new(shape, cfg.seed)?;
    let out = train(net, &train_t, &cfg.train)?;
    let net = out.net.clone();

    let o = table.output_width();
    let mut cache = ForwardCache::new(&net);
    let mut predicted = Vec::with_capacity(test_t.len());
    for block in test_t.rows().chunks(64) {
        let xs: Vec<Vec<f64>> = block.iter().map(|(x, _)| x.to_f64()).collect();
        net.forward_batch(&xs, &mut cache)?;
        for b in 0..block.len() {
            predicted.push(BitVector::threshold(cache.output(b)));
        }
    }
    let mut correct = vec![0usize; o];
    let mut real_ones = vec![0usize; o];
    let mut pred_ones = vec![0usize; o];
    let mut exact = 0usize;
    for ((_, y), p) in test_t.rows().iter().zip(&predicted) {
        if y == p {
            exact += 1;
        }
        for q in 0..o {
            correct[q] += usize::from(y.get(q) == p.get(q));
            real_ones[q] += usize::from(y.get(q));
            pred_ones[q] += usize::from(p.get(q));
        }
    }
    let m = test_t.len() as f64;
    let pins: Vec<PinAverage> = (0..o)
        .map(|q| PinAverage {
            pin_index: q,
            name: table.output_names()[q].clone(),
            real_avg: real_ones[q] as f64 / m,
            predicted_avg: pred_ones[q] as f64 / m,
            accuracy: correct[q] as f64 / m,
        })
        .collect();
    let bit_accuracy = mean(pins.iter().map(|p| p.accuracy));
    Ok(AttackReport {
        mode: AttackMode::Output,
        procedure: PREDICT_PROCEDURE.into(),
        key: None,
        match_rate: exact as f64 / m,
        bit_accuracy: Some(bit_accuracy),
        key_bit_match: None,
        pins,
        predictions: predicted.iter().map(|p| p.to_string01()).collect::<Vec<String>>(),
        restarts: Vec::new(),
        training: Some(TrainingSummary::from_outcome(cfg.train_rows, &out)),
        oracle_rows_used: cfg.train_rows,
        holdout_rows: test_t.len(),
        wall_clock_seconds: 0.0,
        config: AttackConfigEcho::Output(cfg.clone()),
    })
}
