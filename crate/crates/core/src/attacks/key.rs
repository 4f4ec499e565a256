//! Key reconstruction through a differentiable surrogate of the locked
//! netlist.
//!
//! Stage A fits an LSTM to `(x ∥ k) → y` on random stimuli and random keys
//! simulated through the locked structure. Stage B freezes it and descends
//! the oracle error with respect to a relaxed key in `[0, 1]^n`, from several
//! random starting points. Stage C thresholds each candidate and keeps the
//! one that reproduces most held-out oracle rows on the real netlist.
//!
//! The surrogate's input is the functional stimulus zero-padded to a whole
//! number of chunks, followed by the key. Since the key occupies the final
//! timesteps, the recurrent state reached after the stimulus chunks does not
//! depend on the key and is computed once per oracle row.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{
    AttackConfigEcho, AttackError, AttackMode, AttackReport, ThreatModel, TrainingSummary,
};
use crate::bits::BitVector;
use crate::drnn::{
    output_error, train_dataset, Dataset, ForwardCache, LstmNetwork, NetShape, TrainConfig,
    DEFAULT_LEARNING_RATE, DEFAULT_MOMENTUM,
};
use crate::locking::{Key, LockedNetlist};
use crate::rng;
use crate::simulator::{KeyScorer, Simulator};

pub const KEY_PROCEDURE: &str = "surrogate-gradient-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    /// Synthetic `(x, k)` rows simulated for training.
    pub rows: usize,
    pub hidden: Vec<usize>,
    pub chunk_width: usize,
    /// `train.seed` is replaced by one derived from the attack seed.
    pub train: TrainConfig,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            rows: 8192,
            hidden: vec![32, 32],
            chunk_width: 8,
            train: TrainConfig {
                max_epochs: 60,
                patience: 20,
                dev_fraction: 0.1,
                batch_size: 8,
                ..TrainConfig::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyOptConfig {
    pub restarts: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    /// Stop a restart once its thresholded key is unchanged for this many
    /// consecutive epochs.
    pub stable_epochs: usize,
}

impl Default for KeyOptConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            epochs: 200,
            learning_rate: DEFAULT_LEARNING_RATE,
            momentum: DEFAULT_MOMENTUM,
            batch_size: 32,
            stable_epochs: 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyAttackConfig {
    pub surrogate: SurrogateConfig,
    pub optimize: KeyOptConfig,
    /// Fraction of the oracle held out for candidate validation.
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl Default for KeyAttackConfig {
    fn default() -> Self {
        Self {
            surrogate: SurrogateConfig::default(),
            optimize: KeyOptConfig::default(),
            holdout_fraction: 0.25,
            seed: 0,
        }
    }
}

impl KeyAttackConfig {
    fn validate(&self) -> Result<(), AttackError> {
        let bad = |m: &str| Err(AttackError::InvalidConfig(m.into()));
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return bad("holdout fraction must lie in (0, 1)");
        }
        let o = &self.optimize;
        if o.restarts == 0 || o.epochs == 0 || o.batch_size == 0 || o.stable_epochs == 0 {
            return bad("restarts, epochs, batch size and stability window must be positive");
        }
        if !o.learning_rate.is_finite() || o.learning_rate <= 0.0 || !(0.0..1.0).contains(&o.momentum) {
            return bad("key learning rate must be positive and momentum in [0, 1)");
        }
        Ok(())
    }
}

/// Outcome of one key-optimization restart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartOutcome {
    pub restart: usize,
    pub key: String,
    pub relaxed_key: Vec<f64>,
    pub holdout_match_rate: f64,
    pub optimization_match_rate: f64,
    /// Surrogate MSE on the optimization rows in the last epoch run.
    pub final_mse: f64,
    pub epochs: usize,
}

/// A trained stand-in for the locked netlist, `g(x ∥ k) ≈ y`.
#[derive(Debug, Clone)]
pub struct Surrogate {
    net: LstmNetwork,
    functional: usize,
    padded: usize,
    key_width: usize,
    summary: TrainingSummary,
}

impl Surrogate {
    pub fn net(&self) -> &LstmNetwork {
        &self.net
    }

    pub fn summary(&self) -> &TrainingSummary {
        &self.summary
    }

    pub fn key_width(&self) -> usize {
        self.key_width
    }

    /// First timestep that reads key bits.
    pub fn key_timestep(&self) -> usize {
        self.padded / self.net.shape().chunk_width
    }

    /// Network input for stimulus `x` under a relaxed key.
    pub fn encode(&self, x: &BitVector, key: &[f64]) -> Vec<f64> {
        let mut v = vec![0.0; self.padded + self.key_width];
        for (i, b) in x.iter().enumerate() {
            v[i] = if b { 1.0 } else { 0.0 };
        }
        v[self.padded..].copy_from_slice(key);
        v
    }
}

/// Stage A: fits a surrogate on simulated rows with uniformly random
/// stimuli and keys.
pub fn train_surrogate(
    locked: &LockedNetlist,
    cfg: &SurrogateConfig,
    seed: u64,
) -> Result<Surrogate, AttackError> {
    let kw = locked.key_width();
    if kw == 0 {
        return Err(crate::locking::LockError::ZeroKeyWidth.into());
    }
    if cfg.chunk_width == 0 {
        return Err(AttackError::InvalidConfig("chunk width must be positive".into()));
    }
    let functional = locked.functional_inputs().len();
    let padded = functional.div_ceil(cfg.chunk_width) * cfg.chunk_width;
    let outputs = locked.netlist().output_count();
    let sim = Simulator::new(locked.netlist());
    let mut r = rng::seeded(rng::derive_seed(seed, 1));
    let stimuli: Vec<BitVector> = (0..cfg.rows)
        .map(|_| BitVector::random(&mut r, functional + kw))
        .collect();
    let responses = sim.eval_batch(&stimuli)?;
    let mut data = Dataset::default();
    for (s, y) in stimuli.iter().zip(&responses) {
        let mut v = vec![0.0; padded + kw];
        for (i, b) in s.iter().enumerate() {
            let at = if i < functional { i } else { padded + i - functional };
            v[at] = if b { 1.0 } else { 0.0 };
        }
        data.inputs.push(v);
        data.targets.push(y.to_f64());
    }
    let shape = NetShape::new(padded + kw, outputs, &cfg.hidden, cfg.chunk_width);
    let net = LstmNetwork::new(shape, rng::derive_seed(seed, 2))?;
    let train_cfg = effective_train_config(cfg, seed);
    let out = train_dataset(net, &data, &train_cfg)?;
    let summary = TrainingSummary::from_outcome(cfg.rows, &out);
    Ok(Surrogate {
        net: out.net,
        functional,
        padded,
        key_width: kw,
        summary,
    })
}

fn effective_train_config(cfg: &SurrogateConfig, seed: u64) -> TrainConfig {
    TrainConfig {
        seed: rng::derive_seed(seed, 3),
        ..cfg.train.clone()
    }
}

/// Recurrent states after the stimulus chunks, one entry per row and layer.
struct PrefixStates {
    layers: usize,
    h: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
}

impl PrefixStates {
    fn compute(s: &Surrogate, xs: &[BitVector]) -> Result<Self, AttackError> {
        let net = &s.net;
        let layers = net.shape().layers();
        let t_last = s.key_timestep() - 1;
        let mut cache = ForwardCache::new(net);
        let mut h = Vec::with_capacity(xs.len() * layers);
        let mut c = Vec::with_capacity(xs.len() * layers);
        let zero_key = vec![0.0; s.key_width];
        for block in xs.chunks(64) {
            let inputs: Vec<Vec<f64>> = block.iter().map(|x| s.encode(x, &zero_key)).collect();
            net.forward_batch(&inputs, &mut cache)?;
            for b in 0..block.len() {
                for l in 0..layers {
                    let (hs, cs) = cache.state(l, t_last, b);
                    h.push(hs.to_vec());
                    c.push(cs.to_vec());
                }
            }
        }
        Ok(Self { layers, h, c })
    }
}

/// Stage B for one restart: momentum descent on a relaxed key from a uniform
/// random start, clamped to `[0, 1]`. Returns the relaxed key, the epochs
/// run and the last epoch's MSE.
pub fn optimize_key(
    s: &Surrogate,
    rows: &[(BitVector, BitVector)],
    cfg: &KeyOptConfig,
    seed: u64,
) -> Result<(Vec<f64>, usize, f64), AttackError> {
    let xs: Vec<BitVector> = rows.iter().map(|(x, _)| x.clone()).collect();
    let prefix = PrefixStates::compute(s, &xs)?;
    let ys: Vec<Vec<f64>> = rows.iter().map(|(_, y)| y.to_f64()).collect();
    optimize_with_prefix(s, &prefix, &ys, cfg, seed)
}

fn optimize_with_prefix(
    s: &Surrogate,
    prefix: &PrefixStates,
    ys: &[Vec<f64>],
    cfg: &KeyOptConfig,
    seed: u64,
) -> Result<(Vec<f64>, usize, f64), AttackError> {
    let net = &s.net;
    let shape = net.shape();
    let (w, steps, o) = (shape.chunk_width, shape.timesteps(), shape.outputs);
    let t_key = s.key_timestep();
    let kw = s.key_width;
    let n = ys.len();
    let mut r = rng::seeded(seed);
    let mut key: Vec<f64> = (0..kw).map(|_| r.gen_range(0.0..=1.0)).collect();
    let mut velocity = vec![0.0; kw];
    let mut grad = vec![0.0; kw];
    let mut order: Vec<usize> = (0..n).collect();
    let mut cache = ForwardCache::new(net);
    let mut inputs: Vec<Vec<f64>> = Vec::new();
    let mut dz = Vec::new();
    let mut dx = Vec::new();
    let mut last_bits = BitVector::threshold(&key);
    let mut stable = 0;
    let mut epochs = 0;
    let mut mse = f64::NAN;
    for _ in 0..cfg.epochs {
        epochs += 1;
        rng::shuffle(&mut r, &mut order);
        let mut sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let b = chunk.len();
            cache.prepare(net, b);
            inputs.resize_with(b, Vec::new);
            for (slot, &row) in chunk.iter().enumerate() {
                for l in 0..prefix.layers {
                    let at = row * prefix.layers + l;
                    cache.set_state(l, t_key - 1, slot, &prefix.h[at], &prefix.c[at]);
                }
                let v = &mut inputs[slot];
                v.clear();
                v.resize(s.padded, 0.0);
                v.extend_from_slice(&key);
            }
            net.forward_from(&inputs[..b], &mut cache, t_key)?;
            dz.clear();
            dz.resize(b * o, 0.0);
            for (slot, &row) in chunk.iter().enumerate() {
                sum += output_error(cache.output(slot), &ys[row], None, &mut dz[slot * o..(slot + 1) * o]);
            }
            dx.clear();
            dx.resize(b * steps * w, 0.0);
            net.input_gradients(&mut cache, &dz, &mut dx, t_key)?;
            grad.fill(0.0);
            for slot in 0..b {
                let base = slot * steps * w + s.padded;
                for (g, d) in grad.iter_mut().zip(&dx[base..base + kw]) {
                    *g += d;
                }
            }
            for i in 0..kw {
                velocity[i] = cfg.momentum * velocity[i] - cfg.learning_rate * grad[i];
                key[i] = (key[i] + velocity[i]).clamp(0.0, 1.0);
            }
        }
        mse = sum / (n * o) as f64;
        if !mse.is_finite() {
            return Err(crate::drnn::DrnnError::Diverged {
                epoch: epochs,
                last_finite_epoch: epochs - 1,
            }
            .into());
        }
        let bits = BitVector::threshold(&key);
        if bits == last_bits {
            stable += 1;
            if stable >= cfg.stable_epochs {
                break;
            }
        } else {
            stable = 0;
            last_bits = bits;
        }
    }
    Ok((key, epochs, mse))
}

/// Full key attack: trains the surrogate, then runs
/// [`attack_key_with_surrogate`].
pub fn attack_key(tm: &ThreatModel, cfg: &KeyAttackConfig) -> Result<AttackReport, AttackError> {
    cfg.validate()?;
    tm.charge(tm.oracle().len())?;
    let s = train_surrogate(tm.locked(), &cfg.surrogate, cfg.seed)?;
    attack_key_with_surrogate(tm, cfg, &s)
}

/// Oracle row indices of the validation slice and of the optimization
/// slice, as used by [`attack_key`] for an oracle of `n` rows.
pub fn holdout_split(n: usize, cfg: &KeyAttackConfig) -> Result<(Vec<usize>, Vec<usize>), AttackError> {
    let n_hold = libm::ceil(cfg.holdout_fraction * n as f64) as usize;
    if n < 2 || n_hold == 0 || n_hold >= n {
        return Err(AttackError::OracleTooSmall { needed: 2, found: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    rng::shuffle(&mut rng::seeded(rng::derive_seed(cfg.seed, 4)), &mut order);
    let opt = order.split_off(n_hold);
    Ok((order, opt))
}

/// Stages B and C with an already trained surrogate (which only depends on
/// the locked structure, the surrogate config and the seed).
pub fn attack_key_with_surrogate(
    tm: &ThreatModel,
    cfg: &KeyAttackConfig,
    s: &Surrogate,
) -> Result<AttackReport, AttackError> {
    cfg.validate()?;
    let locked = tm.locked();
    if s.key_width != locked.key_width()
        || s.functional != locked.functional_inputs().len()
        || s.net.shape().outputs != locked.netlist().output_count()
    {
        return Err(AttackError::InvalidConfig("surrogate does not fit this netlist".into()));
    }
    let oracle = tm.oracle();
    tm.charge(oracle.len())?;
    let n = oracle.len();
    let (hold_idx, opt_idx) = holdout_split(n, cfg)?;
    let n_hold = hold_idx.len();
    let holdout = oracle.select(&hold_idx);
    let opt = oracle.select(&opt_idx);

    let xs: Vec<BitVector> = opt.rows().iter().map(|(x, _)| x.clone()).collect();
    let ys: Vec<Vec<f64>> = opt.rows().iter().map(|(_, y)| y.to_f64()).collect();
    let prefix = PrefixStates::compute(s, &xs)?;
    let hold_scorer = KeyScorer::new(locked, &holdout)?;
    let opt_scorer = KeyScorer::new(locked, &opt)?;

    let mut restarts = Vec::with_capacity(cfg.optimize.restarts);
    for restart in 0..cfg.optimize.restarts {
        let seed = rng::derive_seed(cfg.seed, 100 + restart as u64);
        let (relaxed, epochs, final_mse) = optimize_with_prefix(s, &prefix, &ys, &cfg.optimize, seed)?;
        let key = Key::new(BitVector::threshold(&relaxed));
        restarts.push(RestartOutcome {
            restart,
            key: key.bits().to_string01(),
            relaxed_key: relaxed,
            holdout_match_rate: hold_scorer.match_rate(&key)?,
            optimization_match_rate: opt_scorer.match_rate(&key)?,
            final_mse,
            epochs,
        });
    }
    // Highest held-out rate; ties go to the optimization-slice rate, then
    // to the lowest restart index.
    let best = restarts
        .iter()
        .reduce(|best, r| {
            let better = (r.holdout_match_rate, r.optimization_match_rate)
                > (best.holdout_match_rate, best.optimization_match_rate);
            if better {
                r
            } else {
                best
            }
        })
        .expect("at least one restart");

    let mut echo = cfg.clone();
    echo.surrogate.train = effective_train_config(&cfg.surrogate, cfg.seed);
    Ok(AttackReport {
        mode: AttackMode::Key,
        procedure: KEY_PROCEDURE.into(),
        key: Some(best.key.clone()),
        match_rate: best.holdout_match_rate,
        bit_accuracy: None,
        key_bit_match: None,
        pins: Vec::new(),
        predictions: Vec::new(),
        training: Some(s.summary.clone()),
        restarts,
        oracle_rows_used: n,
        holdout_rows: n_hold,
        wall_clock_seconds: 0.0,
        config: AttackConfigEcho::Key(echo),
    })
}
