//! One UMEG block: per temporal offset, shift then spatial GCN, then
//! per-scale down-projection, concatenation, and an up-projection added back
//! through a residual connection.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{shift_streams, unshift_accumulate, Feat, Param};
use crate::linalg;

pub struct UmegBlock {
    pub d_in: usize,
    pub d_out: usize,
    pub deltas: Vec<usize>,
    /// Per-scale fusion width `floor(d_out / |deltas|)`.
    pub fuse_width: usize,
    pub alpha: f64,
    pub identity_shift: bool,
    /// Shared spatial projection across the shifted streams (d_in x d_out).
    pub gcn_weight: Param,
    /// Per-scale down projections (d_out x fuse_width).
    pub fuse_down_w: Vec<Param>,
    pub fuse_down_b: Vec<Param>,
    /// Up projection back to d_out (|deltas|*fuse_width x d_out).
    pub fuse_up_w: Param,
    pub fuse_up_b: Param,
    /// Residual projection, present only when the width changes.
    pub residual_w: Option<Param>,
    /// Learnable additive adjacency refinement (V x V), zero-initialized.
    pub adj_refine: Option<Param>,
}

pub struct BlockCache {
    /// Aggregated inputs `A_eff * shift(H, delta)`, one per scale.
    aggregated: Vec<Feat>,
    /// Post-ReLU GCN activations, one per scale.
    activations: Vec<Feat>,
    /// Post-ReLU fused features (T, V, |deltas|*fuse_width).
    fused: Feat,
    /// Effective adjacency when refinement is active.
    refined_adjacency: Option<Vec<f64>>,
}

fn uniform_init(rng: &mut ChaCha8Rng, param: &mut Param, fan_in: usize) {
    let bound = 1.0 / (fan_in as f64).sqrt();
    for v in param.value.iter_mut() {
        *v = rng.random_range(-bound..bound);
    }
}

impl UmegBlock {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        index: usize,
        d_in: usize,
        d_out: usize,
        deltas: &[usize],
        alpha: f64,
        identity_shift: bool,
        refine_adjacency: bool,
        node_count: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let scales = deltas.len();
        let fuse_width = d_out / scales;
        let prefix = format!("block{index}");
        let mut gcn_weight = Param::zeros(format!("{prefix}.gcn.weight"), vec![d_in, d_out]);
        uniform_init(rng, &mut gcn_weight, d_in);
        let mut fuse_down_w = Vec::with_capacity(scales);
        let mut fuse_down_b = Vec::with_capacity(scales);
        for s in 0..scales {
            let mut w = Param::zeros(
                format!("{prefix}.fuse_down{s}.weight"),
                vec![d_out, fuse_width],
            );
            uniform_init(rng, &mut w, d_out);
            fuse_down_w.push(w);
            // Non-zero bias init: these feed a ReLU, and a zero bias parks
            // dead rows exactly on its kink.
            let mut b = Param::zeros(format!("{prefix}.fuse_down{s}.bias"), vec![fuse_width]);
            uniform_init(rng, &mut b, d_out);
            fuse_down_b.push(b);
        }
        let mut fuse_up_w = Param::zeros(
            format!("{prefix}.fuse_up.weight"),
            vec![scales * fuse_width, d_out],
        );
        uniform_init(rng, &mut fuse_up_w, scales * fuse_width);
        let fuse_up_b = Param::zeros(format!("{prefix}.fuse_up.bias"), vec![d_out]);
        let residual_w = (d_in != d_out).then(|| {
            let mut w = Param::zeros(format!("{prefix}.residual.weight"), vec![d_in, d_out]);
            uniform_init(rng, &mut w, d_in);
            w
        });
        let adj_refine = refine_adjacency.then(|| {
            Param::zeros(format!("{prefix}.adj_refine"), vec![node_count, node_count])
        });
        Self {
            d_in,
            d_out,
            deltas: deltas.to_vec(),
            fuse_width,
            alpha,
            identity_shift,
            gcn_weight,
            fuse_down_w,
            fuse_down_b,
            fuse_up_w,
            fuse_up_b,
            residual_w,
            adj_refine,
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut out = vec![&self.gcn_weight];
        for (w, b) in self.fuse_down_w.iter().zip(&self.fuse_down_b) {
            out.push(w);
            out.push(b);
        }
        out.push(&self.fuse_up_w);
        out.push(&self.fuse_up_b);
        if let Some(w) = &self.residual_w {
            out.push(w);
        }
        if let Some(b) = &self.adj_refine {
            out.push(b);
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out: Vec<&mut Param> = vec![&mut self.gcn_weight];
        for (w, b) in self.fuse_down_w.iter_mut().zip(self.fuse_down_b.iter_mut()) {
            out.push(w);
            out.push(b);
        }
        out.push(&mut self.fuse_up_w);
        out.push(&mut self.fuse_up_b);
        if let Some(w) = &mut self.residual_w {
            out.push(w);
        }
        if let Some(b) = &mut self.adj_refine {
            out.push(b);
        }
        out
    }

    fn shift(&self, h: &Feat, delta: usize) -> Feat {
        if self.identity_shift {
            h.clone()
        } else {
            shift_streams(h, self.alpha, delta)
        }
    }

    /// Effective adjacency: `relu(A_norm + B)` under refinement, `A_norm`
    /// otherwise. `A_norm` is non-negative, so the ReLU is the identity at
    /// the zero initialization of `B`.
    fn effective_adjacency(&self, a_norm: &[f64]) -> Option<Vec<f64>> {
        self.adj_refine.as_ref().map(|b| {
            a_norm
                .iter()
                .zip(&b.value)
                .map(|(&a, &r)| (a + r).max(0.0))
                .collect()
        })
    }

    pub fn forward(&self, h: &Feat, a_norm: &[f64]) -> (Feat, BlockCache) {
        let (t, v) = (h.frames, h.nodes);
        debug_assert_eq!(h.channels, self.d_in);
        debug_assert_eq!(a_norm.len(), v * v);
        let refined = self.effective_adjacency(a_norm);
        let a_eff: &[f64] = refined.as_deref().unwrap_or(a_norm);
        let scales = self.deltas.len();
        let rows = t * v;

        let mut aggregated = Vec::with_capacity(scales);
        let mut activations = Vec::with_capacity(scales);
        let mut concat = Feat::zeros(t, v, scales * self.fuse_width);
        for (s, &delta) in self.deltas.iter().enumerate() {
            let shifted = self.shift(h, delta);
            let mut agg = Feat::zeros(t, v, self.d_in);
            for ti in 0..t {
                linalg::matmul_acc(a_eff, shifted.frame(ti), agg.frame_mut(ti), v, v, self.d_in);
            }
            let mut z = Feat::zeros(t, v, self.d_out);
            linalg::matmul_acc(&agg.data, &self.gcn_weight.value, &mut z.data, rows, self.d_in, self.d_out);
            linalg::relu_inplace(&mut z.data);

            // Down-project this scale straight into its concat column block.
            let m = self.fuse_width;
            let mut y = vec![0.0; rows * m];
            linalg::matmul_acc(&z.data, &self.fuse_down_w[s].value, &mut y, rows, self.d_out, m);
            let bias = &self.fuse_down_b[s].value;
            for (row_idx, y_row) in y.chunks_exact(m).enumerate() {
                let dst = row_idx * scales * m + s * m;
                for (i, (&yv, &bv)) in y_row.iter().zip(bias).enumerate() {
                    concat.data[dst + i] = yv + bv;
                }
            }
            aggregated.push(agg);
            activations.push(z);
        }

        linalg::relu_inplace(&mut concat.data);
        let fused = concat;

        let mut out = Feat::zeros(t, v, self.d_out);
        linalg::matmul_acc(
            &fused.data,
            &self.fuse_up_w.value,
            &mut out.data,
            rows,
            scales * self.fuse_width,
            self.d_out,
        );
        for row in out.data.chunks_exact_mut(self.d_out) {
            for (o, &b) in row.iter_mut().zip(&self.fuse_up_b.value) {
                *o += b;
            }
        }
        match &self.residual_w {
            None => linalg::axpy(1.0, &h.data, &mut out.data),
            Some(w) => {
                linalg::matmul_acc(&h.data, &w.value, &mut out.data, rows, self.d_in, self.d_out)
            }
        }

        (
            out,
            BlockCache {
                aggregated,
                activations,
                fused,
                refined_adjacency: refined,
            },
        )
    }

    /// Accumulates parameter gradients and returns the gradient with respect
    /// to the block input.
    pub fn backward(
        &mut self,
        h_in: &Feat,
        a_norm: &[f64],
        cache: &BlockCache,
        grad_out: &Feat,
    ) -> Feat {
        let (t, v) = (h_in.frames, h_in.nodes);
        let rows = t * v;
        let scales = self.deltas.len();
        let m = self.fuse_width;
        let a_eff: &[f64] = cache.refined_adjacency.as_deref().unwrap_or(a_norm);

        // Up projection.
        for row in grad_out.data.chunks_exact(self.d_out) {
            for (g, &gv) in self.fuse_up_b.grad.iter_mut().zip(row) {
                *g += gv;
            }
        }
        linalg::matmul_at_acc(
            &cache.fused.data,
            &grad_out.data,
            &mut self.fuse_up_w.grad,
            rows,
            scales * m,
            self.d_out,
        );
        let mut grad_fused = Feat::zeros(t, v, scales * m);
        linalg::matmul_bt_acc(
            &grad_out.data,
            &self.fuse_up_w.value,
            &mut grad_fused.data,
            rows,
            self.d_out,
            scales * m,
        );
        linalg::relu_backward_inplace(&mut grad_fused.data, &cache.fused.data);

        let mut grad_h = Feat::zeros(t, v, self.d_in);
        let mut grad_adj = cache
            .refined_adjacency
            .as_ref()
            .map(|_| vec![0.0; v * v]);

        for (s, &delta) in self.deltas.iter().enumerate() {
            // Per-scale slice of the fused gradient.
            let mut grad_y = vec![0.0; rows * m];
            for (row_idx, y_row) in grad_y.chunks_exact_mut(m).enumerate() {
                let src = row_idx * scales * m + s * m;
                y_row.copy_from_slice(&grad_fused.data[src..src + m]);
            }
            for y_row in grad_y.chunks_exact(m) {
                for (g, &gv) in self.fuse_down_b[s].grad.iter_mut().zip(y_row) {
                    *g += gv;
                }
            }
            let z = &cache.activations[s];
            linalg::matmul_at_acc(
                &z.data,
                &grad_y,
                &mut self.fuse_down_w[s].grad,
                rows,
                self.d_out,
                m,
            );
            let mut grad_z = Feat::zeros(t, v, self.d_out);
            linalg::matmul_bt_acc(
                &grad_y,
                &self.fuse_down_w[s].value,
                &mut grad_z.data,
                rows,
                m,
                self.d_out,
            );
            linalg::relu_backward_inplace(&mut grad_z.data, &z.data);

            let agg = &cache.aggregated[s];
            linalg::matmul_at_acc(
                &agg.data,
                &grad_z.data,
                &mut self.gcn_weight.grad,
                rows,
                self.d_in,
                self.d_out,
            );
            let mut grad_agg = Feat::zeros(t, v, self.d_in);
            linalg::matmul_bt_acc(
                &grad_z.data,
                &self.gcn_weight.value,
                &mut grad_agg.data,
                rows,
                self.d_out,
                self.d_in,
            );

            let mut grad_shifted = Feat::zeros(t, v, self.d_in);
            for ti in 0..t {
                // d(shifted) = A_eff^T * d(agg) per frame.
                linalg::matmul_at_acc(
                    a_eff,
                    grad_agg.frame(ti),
                    grad_shifted.frame_mut(ti),
                    v,
                    v,
                    self.d_in,
                );
            }
            if let Some(grad_a) = grad_adj.as_mut() {
                let shifted = self.shift(h_in, delta);
                for ti in 0..t {
                    linalg::matmul_bt_acc(
                        grad_agg.frame(ti),
                        shifted.frame(ti),
                        grad_a,
                        v,
                        self.d_in,
                        v,
                    );
                }
            }
            if self.identity_shift {
                linalg::axpy(1.0, &grad_shifted.data, &mut grad_h.data);
            } else {
                unshift_accumulate(&grad_shifted, self.alpha, delta, &mut grad_h);
            }
        }

        if let (Some(grad_a), Some(refine)) = (grad_adj, self.adj_refine.as_mut()) {
            let a_eff = cache
                .refined_adjacency
                .as_ref()
                .expect("refinement cached its adjacency");
            for ((g, &ga), &mask) in refine.grad.iter_mut().zip(&grad_a).zip(a_eff) {
                if mask > 0.0 {
                    *g += ga;
                }
            }
        }

        // Residual path.
        match &mut self.residual_w {
            None => linalg::axpy(1.0, &grad_out.data, &mut grad_h.data),
            Some(w) => {
                linalg::matmul_at_acc(&h_in.data, &grad_out.data, &mut w.grad, rows, self.d_in, self.d_out);
                linalg::matmul_bt_acc(
                    &grad_out.data,
                    &w.value,
                    &mut grad_h.data,
                    rows,
                    self.d_out,
                    self.d_in,
                );
            }
        }

        grad_h
    }
}

/// Single-block forward pass on raw tensors, mirroring the block equations:
/// for each offset, shift then GCN, fuse the scales, and add the residual.
pub fn umeg_block_forward(block: &UmegBlock, h: &Feat, a_norm: &[f64]) -> Feat {
    block.forward(h, a_norm).0
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn random_feat(rng: &mut ChaCha8Rng, t: usize, v: usize, c: usize) -> Feat {
        let mut f = Feat::zeros(t, v, c);
        for x in f.data.iter_mut() {
            *x = rng.random_range(-1.0..1.0);
        }
        f
    }

    fn identity_adjacency(v: usize) -> Vec<f64> {
        let mut a = vec![0.0; v * v];
        for i in 0..v {
            a[i * v + i] = 1.0;
        }
        a
    }

    #[test]
    fn fusion_widths_follow_floor_arithmetic() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let block = UmegBlock::new(0, 64, 64, &[1, 2, 4], 0.125, false, false, 5, &mut rng);
        assert_eq!(block.fuse_width, 21);
        assert_eq!(block.fuse_down_w[0].shape, vec![64, 21]);
        assert_eq!(block.fuse_up_w.shape, vec![63, 64]);
    }

    #[test]
    fn zeroed_up_projection_makes_the_block_an_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut block = UmegBlock::new(0, 8, 8, &[1, 2], 0.125, false, false, 4, &mut rng);
        block.fuse_up_w.value.fill(0.0);
        block.fuse_up_b.value.fill(0.0);
        let h = random_feat(&mut rng, 5, 4, 8);
        let a = identity_adjacency(4);
        let (out, _) = block.forward(&h, &a);
        assert_eq!(out.data, h.data);
    }

    #[test]
    fn single_frame_ignores_shifted_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let block = UmegBlock::new(0, 8, 8, &[1, 2, 4], 0.125, false, false, 3, &mut rng);
        let a = identity_adjacency(3);
        let mut h1 = random_feat(&mut rng, 1, 3, 8);
        let mut h2 = h1.clone();
        // Differ only in the shifted channel groups (static width is 6).
        for v in 0..3 {
            h2.data[v * 8 + 6] = h1.at(0, v, 6) + 1.0;
            h2.data[v * 8 + 7] = h1.at(0, v, 7) - 1.0;
        }
        let (o1, _) = block.forward(&h1, &a);
        let (o2, _) = block.forward(&h2, &a);
        // The GCN path sees identical (zero-padded) shifted streams; only the
        // residual passes the difference through.
        for v in 0..3 {
            for c in 0..6 {
                assert_eq!(o1.at(0, v, c), o2.at(0, v, c));
            }
            assert!((o2.at(0, v, 6) - o1.at(0, v, 6) - 1.0).abs() < 1e-12);
            assert!((o2.at(0, v, 7) - o1.at(0, v, 7) + 1.0).abs() < 1e-12);
        }
        // Static channels influence the outputs identically for both.
        h1.data[5] += 0.5;
        let (o3, _) = block.forward(&h1, &a);
        assert_ne!(o3.data, o1.data);
    }

    #[test]
    fn identity_shift_flag_changes_no_parameter_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let shifted = UmegBlock::new(0, 16, 16, &[1, 2, 4], 0.125, false, false, 4, &mut rng);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let identity = UmegBlock::new(0, 16, 16, &[1, 2, 4], 0.125, true, false, 4, &mut rng);
        let manifest = |b: &UmegBlock| {
            b.params()
                .iter()
                .map(|p| (p.name.clone(), p.shape.clone()))
                .collect::<Vec<_>>()
        };
        assert_eq!(manifest(&shifted), manifest(&identity));
    }

    #[test]
    fn hand_enumerated_parameter_count() {
        // d = 4, |deltas| = 3, no refinement:
        // W: 4*4 = 16; three F1: 3*(4*1 + 1) = 15; F2: 3*4 + 4 = 16 -> 47.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let block = UmegBlock::new(0, 4, 4, &[1, 2, 4], 0.125, false, false, 3, &mut rng);
        let total: usize = block.params().iter().map(|p| p.len()).sum();
        assert_eq!(total, 47);
    }

    #[test]
    fn refinement_adds_v_squared_entries() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let plain = UmegBlock::new(0, 4, 4, &[1], 0.125, false, false, 7, &mut rng);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let refined = UmegBlock::new(0, 4, 4, &[1], 0.125, false, true, 7, &mut rng);
        let count = |b: &UmegBlock| b.params().iter().map(|p| p.len()).sum::<usize>();
        assert_eq!(count(&refined), count(&plain) + 49);
    }
}
