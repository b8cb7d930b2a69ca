//! The UMEG block stack: spatial graph convolution combined with a
//! parameter-free bidirectional multi-scale temporal shift, fusion
//! projections, and residual connections, followed by node mean-pooling into
//! per-frame embeddings.
//!
//! Forward and backward passes are written by hand over flat f64 buffers;
//! every kernel runs in a fixed order so repeated passes are bitwise equal.

mod block;
mod checkpoint;
mod config;
mod model;

pub use block::{umeg_block_forward, BlockCache, UmegBlock};
pub use checkpoint::{apply_params, read_checkpoint, write_checkpoint, CheckpointFile,
    SavedParam, CHECKPOINT_VERSION};
pub use config::BlockConfig;
pub use model::{ModelCache, UmegModel};

use crate::linalg;

/// A named trainable tensor with its gradient accumulator.
#[derive(Debug, Clone)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
}

impl Param {
    pub fn zeros(name: impl Into<String>, shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Self {
            name: name.into(),
            shape,
            value: vec![0.0; len],
            grad: vec![0.0; len],
        }
    }

    pub fn filled(name: impl Into<String>, shape: Vec<usize>, fill: f64) -> Self {
        let mut p = Self::zeros(name, shape);
        p.value.fill(fill);
        p
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

/// Parameter manifest: (name, shape) in canonical traversal order.
pub type Manifest = Vec<(String, Vec<usize>)>;

/// Row-major (frame, node, channel) feature tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Feat {
    pub frames: usize,
    pub nodes: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Feat {
    pub fn zeros(frames: usize, nodes: usize, channels: usize) -> Self {
        Self {
            frames,
            nodes,
            channels,
            data: vec![0.0; frames * nodes * channels],
        }
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        let stride = self.nodes * self.channels;
        &self.data[t * stride..(t + 1) * stride]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [f64] {
        let stride = self.nodes * self.channels;
        &mut self.data[t * stride..(t + 1) * stride]
    }

    pub fn at(&self, t: usize, v: usize, c: usize) -> f64 {
        self.data[(t * self.nodes + v) * self.channels + c]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Per-frame embeddings produced by mean-pooling node features.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameEmbeddings {
    pub frames: usize,
    pub dim: usize,
    /// Row-major (frame, channel).
    pub data: Vec<f64>,
}

impl FrameEmbeddings {
    pub fn zeros(frames: usize, dim: usize) -> Self {
        Self {
            frames,
            dim,
            data: vec![0.0; frames * dim],
        }
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Channel budget of the temporal split: `(static, shifted)` where `shifted`
/// is the width of each of the forward and backward streams. The floor
/// remainder stays static, so the three parts always sum to `d`.
pub fn split_sizes(channels: usize, alpha: f64) -> (usize, usize) {
    let shifted = (alpha * channels as f64).floor() as usize;
    (channels - 2 * shifted, shifted)
}

/// Splits one frame's features into (static, forward-shift, backward-shift)
/// channel groups. Concatenating the parts in order reconstructs the input.
pub fn channel_split(
    frame: &[f64],
    channels: usize,
    alpha: f64,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    debug_assert_eq!(frame.len() % channels, 0);
    let (d_static, d_shift) = split_sizes(channels, alpha);
    let nodes = frame.len() / channels;
    let mut part_static = Vec::with_capacity(nodes * d_static);
    let mut part_fwd = Vec::with_capacity(nodes * d_shift);
    let mut part_bwd = Vec::with_capacity(nodes * d_shift);
    for row in frame.chunks_exact(channels) {
        part_static.extend_from_slice(&row[..d_static]);
        part_fwd.extend_from_slice(&row[d_static..d_static + d_shift]);
        part_bwd.extend_from_slice(&row[d_static + d_shift..]);
    }
    (part_static, part_fwd, part_bwd)
}

/// Bidirectional temporal shift: frame `t` of the output carries
/// `[static_t || fwd_{t-delta} || bwd_{t+delta}]`, zero-padded at clip
/// boundaries. Static channels are copied untouched.
pub fn shift_streams(h: &Feat, alpha: f64, delta: usize) -> Feat {
    debug_assert!(delta >= 1);
    let (d_static, d_shift) = split_sizes(h.channels, alpha);
    let mut out = Feat::zeros(h.frames, h.nodes, h.channels);
    let c = h.channels;
    for t in 0..h.frames {
        let src_fwd = t.checked_sub(delta);
        let src_bwd = (t + delta < h.frames).then_some(t + delta);
        for v in 0..h.nodes {
            let dst_base = (t * h.nodes + v) * c;
            let cur_base = (t * h.nodes + v) * c;
            out.data[dst_base..dst_base + d_static]
                .copy_from_slice(&h.data[cur_base..cur_base + d_static]);
            if let Some(ts) = src_fwd {
                let src_base = (ts * h.nodes + v) * c + d_static;
                out.data[dst_base + d_static..dst_base + d_static + d_shift]
                    .copy_from_slice(&h.data[src_base..src_base + d_shift]);
            }
            if let Some(ts) = src_bwd {
                let src_base = (ts * h.nodes + v) * c + d_static + d_shift;
                out.data[dst_base + d_static + d_shift..dst_base + c]
                    .copy_from_slice(&h.data[src_base..src_base + d_shift]);
            }
        }
    }
    out
}

/// Adjoint of [`shift_streams`]: scatters output gradients back to the frames
/// they were read from.
pub fn unshift_accumulate(grad_shifted: &Feat, alpha: f64, delta: usize, grad_h: &mut Feat) {
    let (d_static, d_shift) = split_sizes(grad_shifted.channels, alpha);
    let c = grad_shifted.channels;
    for t in 0..grad_shifted.frames {
        for v in 0..grad_shifted.nodes {
            let src_base = (t * grad_shifted.nodes + v) * c;
            let dst_base = (t * grad_shifted.nodes + v) * c;
            linalg::axpy(
                1.0,
                &grad_shifted.data[src_base..src_base + d_static],
                &mut grad_h.data[dst_base..dst_base + d_static],
            );
            if let Some(ts) = t.checked_sub(delta) {
                let dst = (ts * grad_shifted.nodes + v) * c + d_static;
                linalg::axpy(
                    1.0,
                    &grad_shifted.data[src_base + d_static..src_base + d_static + d_shift],
                    &mut grad_h.data[dst..dst + d_shift],
                );
            }
            if t + delta < grad_shifted.frames {
                let dst = ((t + delta) * grad_shifted.nodes + v) * c + d_static + d_shift;
                linalg::axpy(
                    1.0,
                    &grad_shifted.data[src_base + d_static + d_shift..src_base + c],
                    &mut grad_h.data[dst..dst + d_shift],
                );
            }
        }
    }
}

/// One spatial GCN layer: `ReLU(A * H_t * W)` applied per frame.
pub fn gcn_layer(h: &Feat, adjacency: &[f64], weight: &[f64], d_out: usize) -> Feat {
    let v = h.nodes;
    debug_assert_eq!(adjacency.len(), v * v);
    debug_assert_eq!(weight.len(), h.channels * d_out);
    let mut aggregated = Feat::zeros(h.frames, v, h.channels);
    for t in 0..h.frames {
        linalg::matmul_acc(adjacency, h.frame(t), aggregated.frame_mut(t), v, v, h.channels);
    }
    let mut out = Feat::zeros(h.frames, v, d_out);
    linalg::matmul_acc(
        &aggregated.data,
        weight,
        &mut out.data,
        h.frames * v,
        h.channels,
        d_out,
    );
    linalg::relu_inplace(&mut out.data);
    out
}
