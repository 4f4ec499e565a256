//! Grid sweeps over key-attack settings.
//!
//! Each repetition `r` owns the seed `derive_seed(seed_base, r)`. That seed
//! fixes the oracle stimuli, the surrogate and the key-search restarts, so
//! cells at different grid points of the same repetition differ only in the
//! swept quantity. Training-size cells take a prefix of one oracle table per
//! repetition, and a surrogate is trained once per distinct
//! (seed, surrogate config) pair and shared by the cells that need it.
//!
//! The per-cell metric (`success`) is the recovered key's exact match rate
//! on a fixed evaluation table of fresh stimuli shared by all cells.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::ValueEnum;
use lockrnn_core::attacks::{
    attack_key_with_surrogate, score_key, train_surrogate, KeyAttackConfig, OracleBudget,
    Surrogate, SurrogateConfig, ThreatModel,
};
use lockrnn_core::locking::{apply_key, LockedNetlist};
use lockrnn_core::rng::derive_seed;
use lockrnn_core::simulator::{gen_io_table, IoTable};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const WORKERS_ENV: &str = "LOCKRNN_WORKERS";

const ORACLE_TAG: u64 = 0x0AC1E;
const EVAL_TAG: u64 = 0xE7A1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    /// Oracle rows given to the attack.
    TrainingSize,
    /// Surrogate momentum α.
    Momentum,
    /// Surrogate learning rate η.
    TrainingStep,
    /// Oracle rows, each point run with one and with two hidden layers.
    Layers,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub points: Vec<f64>,
    pub repetitions: usize,
    pub seed_base: u64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.points.is_empty() {
            return Err(CliError::Config("sweep grid is empty".into()));
        }
        if self.repetitions == 0 {
            return Err(CliError::Config("sweep needs at least one repetition".into()));
        }
        if matches!(self.axis, SweepAxis::TrainingSize | SweepAxis::Layers)
            && self.points.iter().any(|p| *p < 2.0 || p.fract() != 0.0)
        {
            return Err(CliError::Config("training sizes must be integers of at least 2".into()));
        }
        Ok(())
    }
}

/// Everything a sweep holds fixed.
#[derive(Debug, Clone)]
pub struct SweepBase {
    /// Locked netlist with its correct key, used to answer oracle queries.
    pub locked: LockedNetlist,
    pub attack: KeyAttackConfig,
    /// Oracle rows for axes other than training size.
    pub oracle_rows: usize,
    pub eval_rows: usize,
    pub budget: OracleBudget,
    pub workers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub point: f64,
    pub layers: usize,
    pub repetition: usize,
    pub seed: u64,
    /// `ok`, or the error that stopped this cell.
    pub status: String,
    pub success: Option<f64>,
    pub holdout_match_rate: Option<f64>,
    pub key_bit_match: Option<f64>,
    pub surrogate_dev_mse: Option<f64>,
    pub key: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub point: f64,
    pub layers: usize,
    pub runs: usize,
    pub failures: usize,
    pub mean_success: Option<f64>,
    pub mean_surrogate_dev_mse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub cells: Vec<SweepCell>,
    pub summary: Vec<SweepPoint>,
}

struct CellPlan {
    point: f64,
    layers: usize,
    repetition: usize,
    seed: u64,
    oracle_rows: usize,
    cfg: KeyAttackConfig,
}

/// Worker count from [`WORKERS_ENV`], falling back to the machine's
/// available parallelism.
pub fn default_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Applies `f` to every item on up to `workers` threads; results keep the
/// input order.
pub fn par_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let r = f(&items[i]);
                slots.lock().expect("no poisoned workers")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("no poisoned workers")
        .into_iter()
        .map(|r| r.expect("every item processed"))
        .collect()
}

fn plan(spec: &SweepSpec, base: &SweepBase) -> Vec<CellPlan> {
    let mut cells = Vec::new();
    let width = base.attack.surrogate.hidden.first().copied().unwrap_or(32);
    for &point in &spec.points {
        let layer_set: Vec<usize> = match spec.axis {
            SweepAxis::Layers => vec![1, 2],
            _ => vec![base.attack.surrogate.hidden.len()],
        };
        for &layers in &layer_set {
            for repetition in 0..spec.repetitions {
                let seed = derive_seed(spec.seed_base, repetition as u64);
                let mut cfg = base.attack.clone();
                cfg.seed = seed;
                let mut oracle_rows = base.oracle_rows;
                match spec.axis {
                    SweepAxis::TrainingSize => oracle_rows = point as usize,
                    SweepAxis::Layers => {
                        oracle_rows = point as usize;
                        cfg.surrogate.hidden = vec![width; layers];
                    }
                    SweepAxis::Momentum => cfg.surrogate.train.momentum = point,
                    SweepAxis::TrainingStep => cfg.surrogate.train.learning_rate = point,
                }
                cells.push(CellPlan {
                    point,
                    layers,
                    repetition,
                    seed,
                    oracle_rows,
                    cfg,
                });
            }
        }
    }
    cells
}

fn surrogate_key(seed: u64, cfg: &SurrogateConfig) -> String {
    format!("{seed}:{}", serde_json::to_string(cfg).expect("config serializes"))
}

pub fn run_sweep(spec: &SweepSpec, base: &SweepBase) -> Result<SweepResult, CliError> {
    spec.validate()?;
    let truth = base
        .locked
        .correct_key()
        .ok_or_else(|| CliError::Config("sweeps need the locked netlist's correct key".into()))?
        .clone();
    let activated = apply_key(&base.locked, &truth)?;
    let cells = plan(spec, base);
    let max_rows = cells.iter().map(|c| c.oracle_rows).max().unwrap_or(0);
    let oracles: BTreeMap<u64, IoTable> = (0..spec.repetitions)
        .map(|r| {
            let seed = derive_seed(spec.seed_base, r as u64);
            gen_io_table(&activated, max_rows, derive_seed(seed, ORACLE_TAG)).map(|t| (seed, t))
        })
        .collect::<Result<_, _>>()?;
    let eval = gen_io_table(&activated, base.eval_rows, derive_seed(spec.seed_base, EVAL_TAG))?;
    let structure = base.locked.without_key();

    let mut wanted: Vec<(String, u64, SurrogateConfig)> = Vec::new();
    for c in &cells {
        let k = surrogate_key(c.seed, &c.cfg.surrogate);
        if !wanted.iter().any(|(w, _, _)| *w == k) {
            wanted.push((k, c.seed, c.cfg.surrogate.clone()));
        }
    }
    let trained = par_map(&wanted, base.workers, |(_, seed, cfg)| {
        train_surrogate(&structure, cfg, *seed).map_err(|e| e.to_string())
    });
    let surrogates: BTreeMap<String, Result<Surrogate, String>> = wanted
        .into_iter()
        .map(|(k, _, _)| k)
        .zip(trained)
        .collect();

    let results = par_map(&cells, base.workers, |c| {
        let mut cell = SweepCell {
            point: c.point,
            layers: c.layers,
            repetition: c.repetition,
            seed: c.seed,
            status: "ok".into(),
            success: None,
            holdout_match_rate: None,
            key_bit_match: None,
            surrogate_dev_mse: None,
            key: None,
        };
        let outcome = (|| -> Result<(), String> {
            let s = surrogates[&surrogate_key(c.seed, &c.cfg.surrogate)].as_ref().map_err(Clone::clone)?;
            cell.surrogate_dev_mse = Some(s.summary().best_dev_mse);
            let idx: Vec<usize> = (0..c.oracle_rows).collect();
            let oracle = oracles[&c.seed].select(&idx);
            let tm = ThreatModel::new(&structure, oracle, base.budget).map_err(|e| e.to_string())?;
            let report = attack_key_with_surrogate(&tm, &c.cfg, s).map_err(|e| e.to_string())?;
            let report = report.with_key_truth(&truth).map_err(|e| e.to_string())?;
            let key = report.recovered_key().ok_or("attack returned no key")?;
            cell.success = Some(score_key(&structure, &key, &eval).map_err(|e| e.to_string())?);
            cell.holdout_match_rate = Some(report.match_rate);
            cell.key_bit_match = report.key_bit_match;
            cell.key = report.key;
            Ok(())
        })();
        if let Err(e) = outcome {
            cell.status = format!("error: {e}");
        }
        cell
    });
    Ok(SweepResult {
        summary: summarize(&results),
        cells: results,
    })
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn summarize(cells: &[SweepCell]) -> Vec<SweepPoint> {
    let mut keys: Vec<(f64, usize)> = Vec::new();
    for c in cells {
        if !keys.contains(&(c.point, c.layers)) {
            keys.push((c.point, c.layers));
        }
    }
    keys.into_iter()
        .map(|(point, layers)| {
            let group: Vec<&SweepCell> = cells
                .iter()
                .filter(|c| c.point == point && c.layers == layers)
                .collect();
            SweepPoint {
                point,
                layers,
                runs: group.len(),
                failures: group.iter().filter(|c| c.status != "ok").count(),
                mean_success: mean_of(group.iter().filter_map(|c| c.success)),
                mean_surrogate_dev_mse: mean_of(group.iter().filter_map(|c| c.surrogate_dev_mse)),
            }
        })
        .collect()
}

/// Sweep rows as CSV: one row per cell.
pub fn cells_csv(axis: SweepAxis, cells: &[SweepCell]) -> Result<Vec<u8>, CliError> {
    #[derive(Serialize)]
    struct Row<'a> {
        axis: &'a str,
        point: f64,
        layers: usize,
        repetition: usize,
        seed: u64,
        status: &'a str,
        success: Option<f64>,
        holdout_match_rate: Option<f64>,
        key_bit_match: Option<f64>,
        surrogate_dev_mse: Option<f64>,
        key: Option<&'a str>,
    }
    let axis_name = axis.to_possible_value().map(|v| v.get_name().to_owned()).unwrap_or_default();
    let mut w = csv::Writer::from_writer(Vec::new());
    for c in cells {
        w.serialize(Row {
            axis: &axis_name,
            point: c.point,
            layers: c.layers,
            repetition: c.repetition,
            seed: c.seed,
            status: &c.status,
            success: c.success,
            holdout_match_rate: c.holdout_match_rate,
            key_bit_match: c.key_bit_match,
            surrogate_dev_mse: c.surrogate_dev_mse,
            key: c.key.as_deref(),
        })
        .map_err(|e| CliError::Config(format!("csv encoding: {e}")))?;
    }
    w.into_inner().map_err(|e| CliError::Config(format!("csv encoding: {e}")))
}

/// Checks the shape of a success curve: non-decreasing, tolerating at most
/// one drop of no more than `tolerance`.
pub fn is_monotone_with_tolerance(curve: &[f64], tolerance: f64) -> bool {
    let mut drops = 0;
    for w in curve.windows(2) {
        if w[1] < w[0] {
            if w[0] - w[1] > tolerance {
                return false;
            }
            drops += 1;
        }
    }
    drops <= 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_grid_is_rejected() {
        let spec = SweepSpec {
            axis: SweepAxis::Momentum,
            points: vec![],
            repetitions: 1,
            seed_base: 0,
        };
        assert!(matches!(spec.validate(), Err(CliError::Config(_))));
    }

    #[test]
    fn zero_repetitions_rejected() {
        let spec = SweepSpec {
            axis: SweepAxis::Momentum,
            points: vec![0.5],
            repetitions: 0,
            seed_base: 0,
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn par_map_keeps_order() {
        let items: Vec<u32> = (0..50).collect();
        assert_eq!(par_map(&items, 4, |x| x * 2), items.iter().map(|x| x * 2).collect::<Vec<_>>());
    }

    #[test]
    fn monotone_tolerance() {
        assert!(is_monotone_with_tolerance(&[0.1, 0.2, 0.2, 0.9], 0.05));
        assert!(is_monotone_with_tolerance(&[0.1, 0.3, 0.27, 0.9], 0.05));
        assert!(!is_monotone_with_tolerance(&[0.1, 0.3, 0.2, 0.9], 0.05));
        assert!(!is_monotone_with_tolerance(&[0.3, 0.28, 0.5, 0.48], 0.05));
    }

    #[test]
    fn summary_groups_by_point_and_layers() {
        let cell = |point: f64, layers, success| SweepCell {
            point,
            layers,
            repetition: 0,
            seed: 0,
            status: "ok".into(),
            success: Some(success),
            holdout_match_rate: None,
            key_bit_match: None,
            surrogate_dev_mse: None,
            key: None,
        };
        let s = summarize(&[cell(64.0, 1, 0.5), cell(64.0, 1, 1.0), cell(64.0, 2, 1.0)]);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].mean_success, Some(0.75));
        assert_eq!(s[1].runs, 1);
    }
}
