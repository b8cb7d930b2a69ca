//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    /// A dataset record could not be parsed. Names the clip and 1-based line.
    #[error("parse error in clip `{clip}` line {line}: {message}")]
    Parse {
        clip: String,
        line: usize,
        message: String,
    },

    /// Structural invariant violated by otherwise well-formed input.
    #[error("validation error in clip `{clip}`: {message}")]
    Validation { clip: String, message: String },

    /// Invalid configuration or incompatible options.
    #[error("config error: {0}")]
    Config(String),

    /// A split request that the clip pool cannot satisfy.
    #[error("capacity error: {0}")]
    Capacity(String),

    /// Checkpoint container could not be loaded or does not match the model.
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    /// Training aborted because the loss became non-finite.
    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },

    /// Mismatched tensor/graph shapes passed to an operation.
    #[error("shape contract violated: {0}")]
    Shape(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
