//! Peephole LSTM regressor mapping bit vectors to real-valued outputs.
//!
//! Inputs are fed `chunk_width` bits per timestep; the last layer's final
//! hidden state goes through a linear readout. Training minimizes summed
//! squared error with minibatch momentum descent and backpropagation
//! through time.

mod loss;
mod lstm;
mod network;
mod persist;
mod train;

use alloc::string::String;

pub use loss::{loss, output_error, LossValue};
pub use lstm::{ForwardCache, Gradients};
pub use network::{LayerParams, LayerParamsMut, LstmGate, LstmNetwork, NetShape, INIT_RANGE};
pub use persist::{decode_model, encode_model, MODEL_MAGIC, MODEL_VERSION};
pub use train::{
    batch_gradients, dataset_mse, step, train, train_dataset, Dataset, EarlyStopper, EpochRecord,
    Schedule, Selection, StopDecision, StopReason, TrainConfig, TrainOutcome, TrainerState,
    DEFAULT_LEARNING_RATE, DEFAULT_MOMENTUM,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DrnnError {
    #[error("invalid network shape: {0}")]
    InvalidShape(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("input has {found} bits but the network accepts at most {max}")]
    InputTooWide { max: usize, found: usize },
    #[error("no forward pass cached for the requested timesteps")]
    MissingForwardCache,
    #[error("training needs at least {needed} rows, got {found}")]
    InsufficientRows { needed: usize, found: usize },
    #[error("training diverged at epoch {epoch} (last finite epoch {last_finite_epoch})")]
    Diverged { epoch: usize, last_finite_epoch: usize },
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("not a model file")]
    BadMagic,
    #[error("unsupported model format version {0}")]
    UnsupportedVersion(u32),
    #[error("model file is truncated")]
    Truncated,
    #[error("model file has trailing bytes")]
    TrailingBytes,
    #[error("model file checksum mismatch")]
    ChecksumMismatch,
}
