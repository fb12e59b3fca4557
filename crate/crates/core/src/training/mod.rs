//! Toy encoders and the optimization loop for the planted-source task.
//!
//! Four linear heads map raw features to embeddings; an EMA copy of them
//! provides the momentum branch. Gradients flow analytically from the loss
//! through the heads, so end-to-end checks against finite differences are
//! exact up to rounding.

mod checkpoint;
mod config;
mod model;
mod spectrogram;
mod synthetic;
mod train;

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use config::{SyntheticSpec, TrainConfig};
pub use model::{
    adam_step, projection_gradient_check, AdamState, EncoderPairState, Masks, Mode, HEADS,
};
pub use spectrogram::{log_spectrogram, SpectrogramParams};
pub use synthetic::{make_synthetic_batch, signatures, RawBatch, RawSample};
pub use train::{
    heldout_outcomes, inference_mode_for, localization_maps, planted_accuracy, planted_outcomes,
    synthetic_splits, train, train_on, TraceRecord, TrainFailure, TrainOutcome,
};
