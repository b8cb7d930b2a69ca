//! Few-shot precise event spotting on unified multi-entity keypoint graphs.
//!
//! The crate turns per-frame sports keypoint streams into graphs over persons,
//! ball, and court corners, trains a graph network with a parameter-free
//! multi-scale temporal shift to emit frame-accurate event sequences, distills
//! the graph teacher into a raster-input student, and scores everything with
//! edit score and tolerance-windowed F1.
//!
//! Module map:
//! - [`data`]: clip data model, on-disk dataset format, synthetic rally
//!   generation, and k-clip few-shot splits.
//! - [`graph`]: multi-entity graph topology, adjacency normalization, and
//!   coordinate sequences.
//! - [`net`]: the UMEG block stack (spatial GCN + bidirectional multi-scale
//!   temporal shift) with hand-written forward/backward passes.
//! - [`spot`]: event localizer/classifier heads, the foreground-weighted loss,
//!   AdamW training with warm-up + cosine schedule, and peak decoding.
//! - [`distill`]: raster rendering, the convolutional + BiGRU student, feature
//!   matching distillation, and head fine-tuning.
//! - [`metrics`]: edit score and mean F1 with temporal tolerance.
//! - [`predfile`]: the line-delimited prediction file shared by the spotting
//!   heads and the metrics.

pub mod data;
pub mod distill;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod metrics;
pub mod net;
pub mod predfile;
pub mod spot;

pub use error::CoreError;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, CoreError>;
