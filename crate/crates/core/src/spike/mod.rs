//! Spiking layers and the desk-scale recurrent sequence model.

mod architectures;
mod checkpoint;
mod encoder;
mod lif;
mod model;
mod tensor;
mod unrolled;

pub use architectures::{architecture, ArchitectureSpec, ARCHITECTURES};
pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use encoder::{spike_encode, SpikeEncoder, SpikeEncoderConfig};
pub use lif::{atan_smooth, atan_surrogate_grad, lif_backward, lif_forward, lif_step, LifParams, LifState, LifTrace, SpikeFn};
pub use model::{train_toy, ModelConfig, ToySrnn, TrainOutcome};
pub use tensor::Tensor;
pub use unrolled::RecurrentLifNet;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpikeError {
    #[error("DimensionMismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("InvalidParams: {0}")]
    InvalidParams(String),
    #[error("NonFiniteLoss at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("EmptyCorpus")]
    EmptyCorpus,
    #[error("InvalidToken: {0}")]
    InvalidToken(String),
    #[error("InvalidPrompt: {0}")]
    InvalidPrompt(String),
    #[error("Checkpoint: {0}")]
    Checkpoint(String),
}
