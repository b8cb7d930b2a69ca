//! The UMEG model: input lift, a single normalization, the block stack, and
//! node mean-pooling into per-frame embeddings.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BlockConfig, Feat, FrameEmbeddings, Manifest, Param, UmegBlock};
use crate::graph::{normalize_adjacency, GraphSequence, GraphTopology};
use crate::{linalg, CoreError, Result};

const LN_EPSILON: f64 = 1e-5;

pub struct UmegModel {
    pub config: BlockConfig,
    pub topology: GraphTopology,
    /// Symmetric degree-normalized adjacency of the topology.
    pub a_norm: Vec<f64>,
    /// Per-node linear lift from raw (x, y) to the first hidden width,
    /// shared across nodes.
    pub lift_w: Param,
    pub lift_b: Param,
    /// Single normalization after the lift: per frame and channel, node
    /// features are standardized over the node axis. Removes the absolute
    /// coordinate offset so relative geometry and motion carry the signal,
    /// while staying frame-local (no temporal leakage).
    pub norm_gamma: Param,
    pub norm_beta: Param,
    pub blocks: Vec<UmegBlock>,
}

pub struct ModelCache {
    /// Normalized pre-affine activations of the lift normalization.
    ln_xhat: Vec<f64>,
    /// Per (frame, channel) inverse standard deviation over nodes.
    ln_inv_std: Vec<f64>,
    /// Inputs fed to each block; entry 0 is the normalized lift output.
    block_inputs: Vec<Feat>,
    block_caches: Vec<super::BlockCache>,
    frames: usize,
}

impl UmegModel {
    pub fn new(topology: &GraphTopology, config: &BlockConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d0 = config.widths[0];
        let mut lift_w = Param::zeros("lift.weight", vec![2, d0]);
        let bound = 1.0 / (2.0_f64).sqrt();
        for v in lift_w.value.iter_mut() {
            *v = rng.random_range(-bound..bound);
        }
        let lift_b = Param::zeros("lift.bias", vec![d0]);
        let norm_gamma = Param::filled("norm.gamma", vec![d0], 1.0);
        let norm_beta = Param::zeros("norm.beta", vec![d0]);

        let mut blocks = Vec::with_capacity(config.num_blocks());
        let mut d_in = d0;
        for (i, &d_out) in config.widths.iter().enumerate() {
            blocks.push(UmegBlock::new(
                i,
                d_in,
                d_out,
                &config.deltas,
                config.alpha,
                config.identity_shift,
                config.refine_adjacency,
                topology.node_count,
                &mut rng,
            ));
            d_in = d_out;
        }

        Ok(Self {
            config: config.clone(),
            topology: topology.clone(),
            a_norm: normalize_adjacency(topology),
            lift_w,
            lift_b,
            norm_gamma,
            norm_beta,
            blocks,
        })
    }

    pub fn embed_dim(&self) -> usize {
        self.config.embed_dim()
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut out = vec![&self.lift_w, &self.lift_b, &self.norm_gamma, &self.norm_beta];
        for block in &self.blocks {
            out.extend(block.params());
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out: Vec<&mut Param> = vec![
            &mut self.lift_w,
            &mut self.lift_b,
            &mut self.norm_gamma,
            &mut self.norm_beta,
        ];
        for block in &mut self.blocks {
            out.extend(block.params_mut());
        }
        out
    }

    /// Name -> shape manifest in canonical parameter order.
    pub fn manifest(&self) -> Manifest {
        self.params()
            .iter()
            .map(|p| (p.name.clone(), p.shape.clone()))
            .collect()
    }

    /// Total trainable parameter count, the manifest sum.
    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn check_sequence(&self, seq: &GraphSequence) -> Result<()> {
        if seq.topology.node_count != self.topology.node_count
            || seq.topology.layout != self.topology.layout
            || seq.topology.entity_config != self.topology.entity_config
        {
            return Err(CoreError::Shape(format!(
                "sequence topology ({} nodes, {}) does not match model topology ({} nodes, {})",
                seq.topology.node_count,
                seq.topology.entity_config,
                self.topology.node_count,
                self.topology.entity_config
            )));
        }
        Ok(())
    }

    /// Full forward pass: lift, normalize, block stack, node mean-pooling.
    pub fn forward(&self, seq: &GraphSequence) -> Result<(FrameEmbeddings, ModelCache)> {
        self.check_sequence(seq)?;
        let t = seq.frames;
        let v = self.topology.node_count;
        let d0 = self.config.widths[0];
        let positions = t * v;

        // Lift: (T*V, 2) x (2, d0) + bias.
        let mut lifted = Feat::zeros(t, v, d0);
        linalg::matmul_acc(&seq.coords, &self.lift_w.value, &mut lifted.data, positions, 2, d0);
        for row in lifted.data.chunks_exact_mut(d0) {
            for (x, &b) in row.iter_mut().zip(&self.lift_b.value) {
                *x += b;
            }
        }

        // Standardize each (frame, channel) group over the nodes.
        let mut ln_xhat = vec![0.0; positions * d0];
        let mut ln_inv_std = vec![0.0; t * d0];
        let mut normed = Feat::zeros(t, v, d0);
        let inv_v = 1.0 / v as f64;
        for ti in 0..t {
            let frame = lifted.frame(ti);
            for c in 0..d0 {
                let mut mean = 0.0;
                for node in 0..v {
                    mean += frame[node * d0 + c];
                }
                mean *= inv_v;
                let mut var = 0.0;
                for node in 0..v {
                    let diff = frame[node * d0 + c] - mean;
                    var += diff * diff;
                }
                var *= inv_v;
                let inv = 1.0 / (var + LN_EPSILON).sqrt();
                ln_inv_std[ti * d0 + c] = inv;
                for node in 0..v {
                    let idx = (ti * v + node) * d0 + c;
                    let xh = (lifted.data[idx] - mean) * inv;
                    ln_xhat[idx] = xh;
                    normed.data[idx] =
                        self.norm_gamma.value[c] * xh + self.norm_beta.value[c];
                }
            }
        }

        let mut block_inputs = Vec::with_capacity(self.blocks.len());
        let mut block_caches = Vec::with_capacity(self.blocks.len());
        let mut h = normed;
        for block in &self.blocks {
            let (next, cache) = block.forward(&h, &self.a_norm);
            block_inputs.push(h);
            block_caches.push(cache);
            h = next;
        }

        let d = self.embed_dim();
        let mut pooled = FrameEmbeddings::zeros(t, d);
        let inv_v = 1.0 / v as f64;
        for ti in 0..t {
            let dst = &mut pooled.data[ti * d..(ti + 1) * d];
            for node_row in h.frame(ti).chunks_exact(d) {
                for (o, &x) in dst.iter_mut().zip(node_row) {
                    *o += x;
                }
            }
            for o in dst.iter_mut() {
                *o *= inv_v;
            }
        }

        Ok((
            pooled,
            ModelCache {
                ln_xhat,
                ln_inv_std,
                block_inputs,
                block_caches,
                frames: t,
            },
        ))
    }

    /// Inference-only forward.
    pub fn embed(&self, seq: &GraphSequence) -> Result<FrameEmbeddings> {
        Ok(self.forward(seq)?.0)
    }

    /// Backpropagates a gradient on the pooled embeddings, accumulating
    /// parameter gradients.
    pub fn backward(&mut self, seq: &GraphSequence, cache: &ModelCache, grad_pooled: &[f64]) {
        let t = cache.frames;
        let v = self.topology.node_count;
        let d = self.embed_dim();
        debug_assert_eq!(grad_pooled.len(), t * d);

        // Pooling adjoint: every node receives grad / V.
        let inv_v = 1.0 / v as f64;
        let mut grad_h = Feat::zeros(t, v, d);
        for ti in 0..t {
            let src = &grad_pooled[ti * d..(ti + 1) * d];
            for node_row in grad_h.frame_mut(ti).chunks_exact_mut(d) {
                for (g, &gp) in node_row.iter_mut().zip(src) {
                    *g = gp * inv_v;
                }
            }
        }

        let a_norm = std::mem::take(&mut self.a_norm);
        for (i, block) in self.blocks.iter_mut().enumerate().rev() {
            grad_h = block.backward(&cache.block_inputs[i], &a_norm, &cache.block_caches[i], &grad_h);
        }
        self.a_norm = a_norm;

        // Normalization backward, per (frame, channel) group over nodes.
        let d0 = self.config.widths[0];
        let positions = t * v;
        let mut grad_lifted = vec![0.0; positions * d0];
        let n = v as f64;
        for ti in 0..t {
            for c in 0..d0 {
                let gamma = self.norm_gamma.value[c];
                let inv = cache.ln_inv_std[ti * d0 + c];
                let mut sum_dxhat = 0.0;
                let mut sum_dxhat_xhat = 0.0;
                for node in 0..v {
                    let idx = (ti * v + node) * d0 + c;
                    let dy = grad_h.data[idx];
                    let xh = cache.ln_xhat[idx];
                    self.norm_beta.grad[c] += dy;
                    self.norm_gamma.grad[c] += dy * xh;
                    let dxhat = dy * gamma;
                    sum_dxhat += dxhat;
                    sum_dxhat_xhat += dxhat * xh;
                }
                for node in 0..v {
                    let idx = (ti * v + node) * d0 + c;
                    let dxhat = grad_h.data[idx] * gamma;
                    grad_lifted[idx] = inv
                        * (dxhat - sum_dxhat / n - cache.ln_xhat[idx] * sum_dxhat_xhat / n);
                }
            }
        }

        // Lift backward.
        linalg::matmul_at_acc(&seq.coords, &grad_lifted, &mut self.lift_w.grad, positions, 2, d0);
        for row in grad_lifted.chunks_exact(d0) {
            for (g, &gv) in self.lift_b.grad.iter_mut().zip(row) {
                *g += gv;
            }
        }
    }
}
