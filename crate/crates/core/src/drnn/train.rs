//! Minibatch training with momentum and early stopping.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::loss::output_error;
use super::lstm::{ForwardCache, Gradients};
use super::network::LstmNetwork;
use super::DrnnError;
use crate::rng;
use crate::simulator::IoTable;

pub const DEFAULT_LEARNING_RATE: f64 = 0.01;
pub const DEFAULT_MOMENTUM: f64 = 0.9;

/// Inputs and 0/1 targets as reals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub targets: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn from_table(table: &IoTable) -> Self {
        Self {
            inputs: table.rows().iter().map(|(x, _)| x.to_f64()).collect(),
            targets: table.rows().iter().map(|(_, y)| y.to_f64()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            inputs: idx.iter().map(|&i| self.inputs[i].clone()).collect(),
            targets: idx.iter().map(|&i| self.targets[i].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Schedule {
    Constant,
    /// η_e = η₀ · factor^e for epoch index e (from 0).
    Decay { factor: f64 },
}

impl Schedule {
    pub fn rate(&self, base: f64, epoch: usize) -> f64 {
        match *self {
            Schedule::Constant => base,
            Schedule::Decay { factor } => base * libm::pow(factor, epoch as f64),
        }
    }
}

/// Which weights [`train`] returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// The snapshot with the lowest development-set error.
    BestDev,
    /// The weights after the last epoch run.
    Final,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub patience: usize,
    pub dev_fraction: f64,
    pub schedule: Schedule,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub selection: Selection,
    /// Stop once the training-split MSE falls to this value.
    pub target_train_mse: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 200,
            patience: 10,
            dev_fraction: 0.2,
            schedule: Schedule::Constant,
            learning_rate: DEFAULT_LEARNING_RATE,
            momentum: DEFAULT_MOMENTUM,
            batch_size: 16,
            seed: 0,
            selection: Selection::BestDev,
            target_train_mse: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), DrnnError> {
        let bad = |m: &str| Err(DrnnError::InvalidConfig(m.into()));
        if !(self.dev_fraction > 0.0 && self.dev_fraction <= 0.5) {
            return bad("dev fraction must lie in (0, 0.5]");
        }
        if self.patience == 0 {
            return bad("patience must be at least 1");
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if let Schedule::Decay { factor } = self.schedule {
            if !(factor > 0.0 && factor <= 1.0) {
                return bad("decay factor must lie in (0, 1]");
            }
        }
        Ok(())
    }
}

/// Optimizer state: rates and one momentum accumulator per parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainerState {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epoch: usize,
    velocity: Vec<f64>,
}

impl TrainerState {
    pub fn new(net: &LstmNetwork, learning_rate: f64, momentum: f64, batch_size: usize) -> Self {
        Self {
            learning_rate,
            momentum,
            batch_size,
            epoch: 0,
            velocity: vec![0.0; net.param_count()],
        }
    }

    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }
}

/// One momentum update: `ΔW ← −η·∂E/∂W + α·ΔW`, then `W ← W + ΔW`.
pub fn step(net: &mut LstmNetwork, state: &mut TrainerState, grads: &Gradients) {
    let (eta, alpha) = (state.learning_rate, state.momentum);
    for ((w, dw), g) in net
        .params_mut()
        .iter_mut()
        .zip(state.velocity.iter_mut())
        .zip(grads.as_slice())
    {
        *dw = alpha * *dw - eta * g;
        *w += *dw;
    }
}

/// Patience-based early stopping on development-set error.
#[derive(Debug, Clone)]
pub struct EarlyStopper {
    patience: usize,
    best: f64,
    best_epoch: usize,
    since_best: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

impl EarlyStopper {
    pub fn new(patience: usize, baseline: f64) -> Self {
        Self {
            patience,
            best: baseline,
            best_epoch: 0,
            since_best: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, dev_loss: f64) -> StopDecision {
        if dev_loss < self.best {
            self.best = dev_loss;
            self.best_epoch = epoch;
            self.since_best = 0;
            return StopDecision::Improved;
        }
        self.since_best += 1;
        if self.since_best >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }

    pub fn best(&self) -> (usize, f64) {
        (self.best_epoch, self.best)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean over the epoch's minibatches, each measured before its update.
    pub train_mse: f64,
    pub dev_mse: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    EarlyStop,
    TargetReached,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: LstmNetwork,
    pub history: Vec<EpochRecord>,
    /// Development MSE of the weights passed in, before any update.
    pub initial_dev_mse: f64,
    pub best_epoch: usize,
    pub best_dev_mse: f64,
    pub stop: StopReason,
}

/// MSE of the network over a dataset, evaluated in batches.
pub fn dataset_mse(net: &LstmNetwork, data: &Dataset, cache: &mut ForwardCache) -> Result<f64, DrnnError> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    let outputs = net.shape().outputs;
    let mut dz = vec![0.0; outputs];
    for (xs, ys) in data.inputs.chunks(64).zip(data.targets.chunks(64)) {
        net.forward_batch(xs, cache)?;
        for (b, y) in ys.iter().enumerate() {
            sum += output_error(cache.output(b), y, None, &mut dz);
        }
    }
    Ok(sum / (data.len() * outputs) as f64)
}

/// Forward, error and backward over one minibatch; returns the summed
/// squared error and leaves `∂E/∂θ` in `grads`.
pub fn batch_gradients<X: AsRef<[f64]>, Y: AsRef<[f64]>>(
    net: &LstmNetwork,
    inputs: &[X],
    targets: &[Y],
    mask: Option<&[bool]>,
    cache: &mut ForwardCache,
    grads: &mut Gradients,
) -> Result<f64, DrnnError> {
    let o = net.shape().outputs;
    for y in targets {
        if y.as_ref().len() != o {
            return Err(DrnnError::ShapeMismatch("target width differs from output width".into()));
        }
    }
    if inputs.len() != targets.len() {
        return Err(DrnnError::ShapeMismatch("input and target counts differ".into()));
    }
    net.forward_batch(inputs, cache)?;
    let mut dz = vec![0.0; inputs.len() * o];
    let mut e = 0.0;
    for (b, y) in targets.iter().enumerate() {
        e += output_error(cache.output(b), y.as_ref(), mask, &mut dz[b * o..(b + 1) * o]);
    }
    grads.clear();
    net.backward(cache, &dz, grads)?;
    Ok(e)
}

/// Trains on an oracle table (stimuli → responses).
pub fn train(net: LstmNetwork, table: &IoTable, cfg: &TrainConfig) -> Result<TrainOutcome, DrnnError> {
    train_dataset(net, &Dataset::from_table(table), cfg)
}

/// Splits off a seeded development set, runs shuffled minibatch epochs with
/// momentum updates and stops early when the development error has not
/// improved for `patience` epochs.
pub fn train_dataset(
    mut net: LstmNetwork,
    data: &Dataset,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, DrnnError> {
    cfg.validate()?;
    let needed = 2 * cfg.batch_size;
    if data.len() < needed {
        return Err(DrnnError::InsufficientRows {
            needed,
            found: data.len(),
        });
    }
    let outputs = net.shape().outputs;
    if data.targets.iter().any(|y| y.len() != outputs) {
        return Err(DrnnError::ShapeMismatch("target width differs from output width".into()));
    }
    let mut r = rng::seeded(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    rng::shuffle(&mut r, &mut order);
    let n_dev = ((cfg.dev_fraction * data.len() as f64) as usize).max(1);
    let dev = data.subset(&order[..n_dev]);
    let train = data.subset(&order[n_dev..]);

    let mut cache = ForwardCache::new(&net);
    let mut grads = Gradients::zeros_like(&net);
    let mut state = TrainerState::new(&net, cfg.learning_rate, cfg.momentum, cfg.batch_size);
    let initial_dev_mse = dataset_mse(&net, &dev, &mut cache)?;
    let mut stopper = EarlyStopper::new(cfg.patience, initial_dev_mse);
    let mut best_params = net.params().to_vec();
    let mut history = Vec::new();
    let mut stop = StopReason::MaxEpochs;
    let mut idx: Vec<usize> = (0..train.len()).collect();
    let mut xs: Vec<&[f64]> = Vec::with_capacity(cfg.batch_size);
    let mut ys: Vec<&[f64]> = Vec::with_capacity(cfg.batch_size);

    for epoch in 1..=cfg.max_epochs {
        state.epoch = epoch;
        state.learning_rate = cfg.schedule.rate(cfg.learning_rate, epoch - 1);
        rng::shuffle(&mut r, &mut idx);
        let mut sum = 0.0;
        for chunk in idx.chunks(cfg.batch_size) {
            xs.clear();
            ys.clear();
            xs.extend(chunk.iter().map(|&i| train.inputs[i].as_slice()));
            ys.extend(chunk.iter().map(|&i| train.targets[i].as_slice()));
            let e = batch_gradients(&net, &xs, &ys, None, &mut cache, &mut grads)?;
            if !e.is_finite() {
                return Err(DrnnError::Diverged {
                    epoch,
                    last_finite_epoch: epoch - 1,
                });
            }
            sum += e;
            step(&mut net, &mut state, &grads);
        }
        let train_mse = sum / (train.len() * outputs) as f64;
        let dev_mse = dataset_mse(&net, &dev, &mut cache)?;
        if !dev_mse.is_finite() || net.params().iter().any(|p| !p.is_finite()) {
            return Err(DrnnError::Diverged {
                epoch,
                last_finite_epoch: epoch - 1,
            });
        }
        history.push(EpochRecord {
            epoch,
            train_mse,
            dev_mse,
            eta: state.learning_rate,
        });
        let decision = stopper.observe(epoch, dev_mse);
        if decision == StopDecision::Improved {
            best_params.copy_from_slice(net.params());
        }
        if let Some(target) = cfg.target_train_mse {
            if train_mse <= target && dataset_mse(&net, &train, &mut cache)? <= target {
                stop = StopReason::TargetReached;
                break;
            }
        }
        if decision == StopDecision::Stop {
            stop = StopReason::EarlyStop;
            break;
        }
    }
    let (best_epoch, best_dev_mse) = stopper.best();
    if cfg.selection == Selection::BestDev {
        net.params_mut().copy_from_slice(&best_params);
    }
    Ok(TrainOutcome {
        net,
        history,
        initial_dev_mse,
        best_epoch,
        best_dev_mse,
        stop,
    })
}
