//! Event spotting on top of per-frame embeddings: localizer/classifier heads,
//! the foreground-weighted loss, AdamW training with warm-up plus cosine
//! annealing, sliding-window protocol, and peak decoding into event
//! sequences.

mod decode;
mod head;
mod loss;
mod optim;
mod train;
mod window;

pub use decode::{decode, DecodeConfig};
pub use head::{head_forward, sigmoid, FrameScores, SpotHead};
pub use loss::{loss_and_grads, spotting_loss, LossGrads};
pub use optim::{lr_at_epoch, AdamW, AdamWConfig};
pub use train::{
    load_spotter, predict_clip, predict_events, save_spotter, train, EpochStats, SpotterModel,
    TrainHistory,
};
pub use window::{inference_windows, tile_starts, window_labels, window_sequence, window_span};

use serde::{Deserialize, Serialize};

use crate::data::EventLabel;
use crate::{CoreError, Result};

/// An ordered list of (class, frame) event predictions or labels.
pub type EventSequence = Vec<EventLabel>;

/// Training protocol configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Frames per training window.
    pub seq_len: usize,
    /// Temporal dilation inside a window: position `i` samples frame
    /// `start + i * stride`.
    pub stride: usize,
    /// Loss multiplier on labeled (foreground) frames.
    pub foreground_weight: f64,
    pub epochs: usize,
    pub lr: f64,
    /// Linear warm-up duration, in epochs.
    pub warmup_epochs: usize,
    /// Windows accumulated per optimizer step.
    pub batch_size: usize,
    pub weight_decay: f64,
    /// Fraction of labeled clips held out for checkpoint selection.
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seq_len: 96,
            stride: 2,
            foreground_weight: 5.0,
            epochs: 50,
            lr: 1e-3,
            warmup_epochs: 3,
            batch_size: 4,
            weight_decay: 0.01,
            val_fraction: 0.2,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, max_delta: usize) -> Result<()> {
        if self.seq_len < 2 * max_delta {
            return Err(CoreError::Config(format!(
                "seq_len {} is shorter than twice the largest shift offset {max_delta}",
                self.seq_len
            )));
        }
        if self.stride == 0 {
            return Err(CoreError::Config("stride must be at least 1".into()));
        }
        if self.foreground_weight < 1.0 {
            return Err(CoreError::Config(format!(
                "foreground_weight must be >= 1, got {}",
                self.foreground_weight
            )));
        }
        if self.epochs == 0 {
            return Err(CoreError::Config("epochs must be positive".into()));
        }
        if self.lr <= 0.0 || !self.lr.is_finite() {
            return Err(CoreError::Config("learning rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(CoreError::Config("batch_size must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(CoreError::Config("val_fraction must be in [0, 1)".into()));
        }
        Ok(())
    }
}
