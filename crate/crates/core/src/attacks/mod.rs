//! Oracle-guided attacks on a locked netlist: key reconstruction through a
//! trained surrogate, and key-free output and input guessing.

mod key;
mod predict;

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::drnn::DrnnError;
use crate::locking::{Key, LockError, LockedNetlist};
use crate::simulator::{IoTable, KeyScorer, SimError, TableError};

pub use key::{
    attack_key, attack_key_with_surrogate, holdout_split, optimize_key, train_surrogate, KeyAttackConfig,
    KeyOptConfig, RestartOutcome, Surrogate, SurrogateConfig, KEY_PROCEDURE,
};
pub use predict::{attack_input, attack_output, PredictConfig, PREDICT_PROCEDURE};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AttackError {
    #[error(transparent)]
    Lock(#[from] LockError),
    #[error(transparent)]
    Drnn(#[from] DrnnError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("oracle pins do not match the locked netlist's functional pins")]
    SignatureMismatch,
    #[error("attack would consume {used} oracle rows but the budget allows {allowed}")]
    BudgetExceeded { used: usize, allowed: usize },
    #[error("oracle has {found} rows; at least {needed} are needed")]
    OracleTooSmall { needed: usize, found: usize },
    #[error("invalid attack configuration: {0}")]
    InvalidConfig(String),
}

/// How many oracle rows an attacker may consume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum OracleBudget {
    /// A fraction of the `2^inputs` stimulus space.
    Fraction(f64),
    Rows(usize),
}

impl Default for OracleBudget {
    fn default() -> Self {
        OracleBudget::Fraction(0.005)
    }
}

impl OracleBudget {
    /// Rows allowed for a circuit with `inputs` functional inputs.
    pub fn allowed(&self, inputs: usize) -> usize {
        match *self {
            OracleBudget::Rows(n) => n,
            OracleBudget::Fraction(f) => {
                if inputs >= 60 {
                    usize::MAX
                } else {
                    (f * (1u64 << inputs) as f64) as usize
                }
            }
        }
    }
}

/// What the attacker knows: the locked structure, the key width, and a
/// table of queries to the activated chip. The correct key is not held.
#[derive(Debug, Clone)]
pub struct ThreatModel {
    locked: LockedNetlist,
    oracle: IoTable,
    budget: OracleBudget,
}

impl ThreatModel {
    pub fn new(locked: &LockedNetlist, oracle: IoTable, budget: OracleBudget) -> Result<Self, AttackError> {
        if oracle.input_names() != locked.functional_inputs()
            || oracle.output_names() != locked.netlist().outputs()
        {
            return Err(AttackError::SignatureMismatch);
        }
        Ok(Self {
            locked: locked.without_key(),
            oracle,
            budget,
        })
    }

    pub fn locked(&self) -> &LockedNetlist {
        &self.locked
    }

    pub fn key_width(&self) -> usize {
        self.locked.key_width()
    }

    pub fn oracle(&self) -> &IoTable {
        &self.oracle
    }

    pub fn budget(&self) -> OracleBudget {
        self.budget
    }

    pub(crate) fn charge(&self, rows: usize) -> Result<(), AttackError> {
        let allowed = self.budget.allowed(self.oracle.input_width());
        if rows > allowed {
            return Err(AttackError::BudgetExceeded { used: rows, allowed });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackMode {
    Key,
    Output,
    Input,
}

/// Real and predicted mean activation of one pin over held-out rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinAverage {
    pub pin_index: usize,
    pub name: String,
    pub real_avg: f64,
    /// Mean of the thresholded predictions.
    pub predicted_avg: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub rows: usize,
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_dev_mse: f64,
    pub initial_dev_mse: f64,
    pub final_train_mse: f64,
}

impl TrainingSummary {
    pub(crate) fn from_outcome(rows: usize, out: &crate::drnn::TrainOutcome) -> Self {
        Self {
            rows,
            epochs_run: out.history.len(),
            best_epoch: out.best_epoch,
            best_dev_mse: out.best_dev_mse,
            initial_dev_mse: out.initial_dev_mse,
            final_train_mse: out.history.last().map_or(f64::NAN, |r| r.train_mse),
        }
    }
}

/// The configuration an attack ran with, echoed into its report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum AttackConfigEcho {
    Key(KeyAttackConfig),
    Output(PredictConfig),
    Input(PredictConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub mode: AttackMode,
    pub procedure: String,
    /// Recovered key (key mode).
    pub key: Option<String>,
    /// Key mode: exact match rate of the recovered key on held-out oracle
    /// rows. Output/input mode: fraction of held-out rows predicted exactly.
    pub match_rate: f64,
    /// Per-bit accuracy of predictions (output/input mode).
    pub bit_accuracy: Option<f64>,
    /// Fraction of key bits equal to the true key (evaluation mode only).
    pub key_bit_match: Option<f64>,
    pub pins: Vec<PinAverage>,
    /// Thresholded predictions for the held-out rows, as 0/1 strings.
    pub predictions: Vec<String>,
    pub restarts: Vec<RestartOutcome>,
    pub training: Option<TrainingSummary>,
    pub oracle_rows_used: usize,
    pub holdout_rows: usize,
    pub wall_clock_seconds: f64,
    pub config: AttackConfigEcho,
}

impl AttackReport {
    /// Fills in the key-bit agreement with a known key. Call only after the
    /// attack has returned.
    pub fn with_key_truth(mut self, truth: &Key) -> Result<Self, AttackError> {
        let Some(k) = &self.key else {
            return Err(AttackError::InvalidConfig("report carries no key".into()));
        };
        let k = Key::parse01(k).map_err(LockError::from)?;
        if k.width() != truth.width() {
            return Err(LockError::KeyWidthMismatch {
                expected: truth.width(),
                found: k.width(),
            }
            .into());
        }
        self.key_bit_match = Some(k.bit_agreement(truth));
        Ok(self)
    }

    pub fn recovered_key(&self) -> Option<Key> {
        self.key.as_deref().and_then(|k| Key::parse01(k).ok())
    }
}

/// Fraction of holdout rows on which the locked netlist under key `k`
/// reproduces the recorded response.
pub fn score_key(l: &LockedNetlist, k: &Key, holdout: &IoTable) -> Result<f64, AttackError> {
    Ok(KeyScorer::new(l, holdout)?.match_rate(k)?)
}

pub(crate) fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}
