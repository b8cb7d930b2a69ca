//! The raster-input student: a small per-frame convolutional encoder, a
//! bidirectional gated recurrent layer over time, and a linear projection
//! into the teacher's embedding width.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::raster::{RasterClip, RASTER_CHANNELS};
use crate::linalg;
use crate::net::{FrameEmbeddings, Manifest, Param};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StudentConfig {
    pub image_size: usize,
    /// Output channels of the three conv stages.
    pub conv_channels: [usize; 3],
    /// Hidden width per GRU direction.
    pub gru_hidden: usize,
    /// Output embedding width; must equal the teacher's.
    pub output_dim: usize,
}

impl Default for StudentConfig {
    fn default() -> Self {
        Self {
            image_size: 64,
            conv_channels: [8, 16, 32],
            gru_hidden: 32,
            output_dim: 64,
        }
    }
}

/// 3x3 convolution, stride 2, padding 1.
struct ConvStage {
    weight: Param, // [c_out, c_in, 3, 3]
    bias: Param,   // [c_out]
    c_in: usize,
    c_out: usize,
}

impl ConvStage {
    fn new(index: usize, c_in: usize, c_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let fan_in = (c_in * 9) as f64;
        let bound = 1.0 / fan_in.sqrt();
        let mut weight = Param::zeros(format!("stu.conv{index}.weight"), vec![c_out, c_in, 3, 3]);
        for v in weight.value.iter_mut() {
            *v = rng.random_range(-bound..bound);
        }
        // Non-zero bias init keeps blank-patch pre-activations off the ReLU
        // kink (rasters are mostly zeros).
        let mut bias = Param::zeros(format!("stu.conv{index}.bias"), vec![c_out]);
        for v in bias.value.iter_mut() {
            *v = rng.random_range(-bound..bound);
        }
        Self {
            weight,
            bias,
            c_in,
            c_out,
        }
    }

    fn out_size(in_size: usize) -> usize {
        in_size.div_ceil(2)
    }

    /// Forward on one frame (c_in, h, w) -> post-ReLU (c_out, h/2, w/2).
    fn forward(&self, input: &[f64], h: usize, w: usize) -> Vec<f64> {
        let (oh, ow) = (Self::out_size(h), Self::out_size(w));
        let mut out = vec![0.0; self.c_out * oh * ow];
        for co in 0..self.c_out {
            let w_base = co * self.c_in * 9;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = self.bias.value[co];
                    for ci in 0..self.c_in {
                        let in_plane = &input[ci * h * w..(ci + 1) * h * w];
                        let wk = &self.weight.value[w_base + ci * 9..w_base + (ci + 1) * 9];
                        for ky in 0..3 {
                            let iy = (oy * 2 + ky) as i64 - 1;
                            if iy < 0 || iy >= h as i64 {
                                continue;
                            }
                            let row = &in_plane[iy as usize * w..(iy as usize + 1) * w];
                            for kx in 0..3 {
                                let ix = (ox * 2 + kx) as i64 - 1;
                                if ix < 0 || ix >= w as i64 {
                                    continue;
                                }
                                acc += wk[ky * 3 + kx] * row[ix as usize];
                            }
                        }
                    }
                    out[(co * oh + oy) * ow + ox] = acc.max(0.0);
                }
            }
        }
        out
    }

    /// Backward on one frame. `output` is the cached post-ReLU activation.
    fn backward(
        &mut self,
        input: &[f64],
        output: &[f64],
        grad_out: &mut [f64],
        h: usize,
        w: usize,
        grad_input: &mut [f64],
    ) {
        let (oh, ow) = (Self::out_size(h), Self::out_size(w));
        linalg::relu_backward_inplace(grad_out, output);
        for co in 0..self.c_out {
            let w_base = co * self.c_in * 9;
            for oy in 0..oh {
                for ox in 0..ow {
                    let g = grad_out[(co * oh + oy) * ow + ox];
                    if g == 0.0 {
                        continue;
                    }
                    self.bias.grad[co] += g;
                    for ci in 0..self.c_in {
                        let in_plane = &input[ci * h * w..(ci + 1) * h * w];
                        let gi_plane = &mut grad_input[ci * h * w..(ci + 1) * h * w];
                        let wk = &self.weight.value[w_base + ci * 9..w_base + (ci + 1) * 9];
                        let gk = &mut self.weight.grad[w_base + ci * 9..w_base + (ci + 1) * 9];
                        for ky in 0..3 {
                            let iy = (oy * 2 + ky) as i64 - 1;
                            if iy < 0 || iy >= h as i64 {
                                continue;
                            }
                            let row_base = iy as usize * w;
                            for kx in 0..3 {
                                let ix = (ox * 2 + kx) as i64 - 1;
                                if ix < 0 || ix >= w as i64 {
                                    continue;
                                }
                                gk[ky * 3 + kx] += g * in_plane[row_base + ix as usize];
                                gi_plane[row_base + ix as usize] += g * wk[ky * 3 + kx];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// One GRU direction.
struct GruDirection {
    w_z: Param,
    u_z: Param,
    b_z: Param,
    w_r: Param,
    u_r: Param,
    b_r: Param,
    w_n: Param,
    u_n: Param,
    b_n: Param,
    input_dim: usize,
    hidden: usize,
}

struct GruCache {
    /// Per step: z, r, n, h, and q = U_n * h_prev.
    z: Vec<Vec<f64>>,
    r: Vec<Vec<f64>>,
    n: Vec<Vec<f64>>,
    h: Vec<Vec<f64>>,
    q: Vec<Vec<f64>>,
}

impl GruDirection {
    fn new(tag: &str, input_dim: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let mut make = |name: String, rows: usize, cols: usize, fan_in: usize| {
            let mut p = Param::zeros(name, vec![rows, cols]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            for v in p.value.iter_mut() {
                *v = rng.random_range(-bound..bound);
            }
            p
        };
        Self {
            w_z: make(format!("stu.gru.{tag}.w_z"), input_dim, hidden, input_dim),
            u_z: make(format!("stu.gru.{tag}.u_z"), hidden, hidden, hidden),
            b_z: Param::zeros(format!("stu.gru.{tag}.b_z"), vec![hidden]),
            w_r: make(format!("stu.gru.{tag}.w_r"), input_dim, hidden, input_dim),
            u_r: make(format!("stu.gru.{tag}.u_r"), hidden, hidden, hidden),
            b_r: Param::zeros(format!("stu.gru.{tag}.b_r"), vec![hidden]),
            w_n: make(format!("stu.gru.{tag}.w_n"), input_dim, hidden, input_dim),
            u_n: make(format!("stu.gru.{tag}.u_n"), hidden, hidden, hidden),
            b_n: Param::zeros(format!("stu.gru.{tag}.b_n"), vec![hidden]),
            input_dim,
            hidden,
        }
    }

    fn params(&self) -> Vec<&Param> {
        vec![
            &self.w_z, &self.u_z, &self.b_z, &self.w_r, &self.u_r, &self.b_r, &self.w_n,
            &self.u_n, &self.b_n,
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![
            &mut self.w_z, &mut self.u_z, &mut self.b_z, &mut self.w_r, &mut self.u_r,
            &mut self.b_r, &mut self.w_n, &mut self.u_n, &mut self.b_n,
        ]
    }

    /// Runs over `xs[order]`, returning hidden states aligned with `order`.
    fn forward(&self, xs: &[Vec<f64>], order: &[usize]) -> (Vec<Vec<f64>>, GruCache) {
        let h_dim = self.hidden;
        let steps = order.len();
        let mut cache = GruCache {
            z: Vec::with_capacity(steps),
            r: Vec::with_capacity(steps),
            n: Vec::with_capacity(steps),
            h: Vec::with_capacity(steps),
            q: Vec::with_capacity(steps),
        };
        let mut h_prev = vec![0.0; h_dim];
        let mut states = vec![vec![0.0; h_dim]; steps];
        for (step, &t) in order.iter().enumerate() {
            let x = &xs[t];
            let gate = |w: &Param, u: &Param, b: &Param, h_prev: &[f64]| {
                let mut a = b.value.clone();
                linalg::matmul_acc(x, &w.value, &mut a, 1, self.input_dim, h_dim);
                linalg::matmul_acc(h_prev, &u.value, &mut a, 1, h_dim, h_dim);
                a
            };
            let z: Vec<f64> = gate(&self.w_z, &self.u_z, &self.b_z, &h_prev)
                .iter()
                .map(|&a| crate::spot::sigmoid(a))
                .collect();
            let r: Vec<f64> = gate(&self.w_r, &self.u_r, &self.b_r, &h_prev)
                .iter()
                .map(|&a| crate::spot::sigmoid(a))
                .collect();
            let mut q = self.b_n.value.clone();
            linalg::matmul_acc(&h_prev, &self.u_n.value, &mut q, 1, h_dim, h_dim);
            // q holds U_n h_prev + b_n; pre-activation n_a = W_n x + r .* q.
            let mut n_a = vec![0.0; h_dim];
            linalg::matmul_acc(x, &self.w_n.value, &mut n_a, 1, self.input_dim, h_dim);
            for (na, (&rv, &qv)) in n_a.iter_mut().zip(r.iter().zip(&q)) {
                *na += rv * qv;
            }
            let n: Vec<f64> = n_a.iter().map(|&a| a.tanh()).collect();
            let mut h = vec![0.0; h_dim];
            for i in 0..h_dim {
                h[i] = (1.0 - z[i]) * n[i] + z[i] * h_prev[i];
            }
            states[step] = h.clone();
            cache.z.push(z);
            cache.r.push(r);
            cache.n.push(n);
            cache.h.push(h.clone());
            cache.q.push(q);
            h_prev = h;
        }
        (states, cache)
    }

    /// BPTT over the same order; returns input gradients aligned with `xs`.
    fn backward(
        &mut self,
        xs: &[Vec<f64>],
        order: &[usize],
        cache: &GruCache,
        grad_states: &[Vec<f64>],
        grad_xs: &mut [Vec<f64>],
    ) {
        let h_dim = self.hidden;
        let mut dh_next = vec![0.0; h_dim];
        for step in (0..order.len()).rev() {
            let t = order[step];
            let x = &xs[t];
            let h_prev: &[f64] = if step == 0 {
                &[]
            } else {
                &cache.h[step - 1]
            };
            let zero = vec![0.0; h_dim];
            let h_prev = if step == 0 { &zero[..] } else { h_prev };

            let mut dh: Vec<f64> = grad_states[step].clone();
            linalg::axpy(1.0, &dh_next, &mut dh);

            let z = &cache.z[step];
            let r = &cache.r[step];
            let n = &cache.n[step];
            let q = &cache.q[step];

            let mut dh_prev = vec![0.0; h_dim];
            let mut da_z = vec![0.0; h_dim];
            let mut da_r = vec![0.0; h_dim];
            let mut da_n = vec![0.0; h_dim];
            for i in 0..h_dim {
                let dn = dh[i] * (1.0 - z[i]);
                let dz = dh[i] * (h_prev[i] - n[i]);
                dh_prev[i] += dh[i] * z[i];
                da_n[i] = dn * (1.0 - n[i] * n[i]);
                da_z[i] = dz * z[i] * (1.0 - z[i]);
                let dr = da_n[i] * q[i];
                da_r[i] = dr * r[i] * (1.0 - r[i]);
            }
            // q-path: dq = da_n .* r feeds U_n and b_n.
            let dq: Vec<f64> = da_n.iter().zip(r).map(|(&dn, &rv)| dn * rv).collect();

            // Parameter gradients.
            linalg::matmul_at_acc(x, &da_z, &mut self.w_z.grad, 1, self.input_dim, h_dim);
            linalg::matmul_at_acc(h_prev, &da_z, &mut self.u_z.grad, 1, h_dim, h_dim);
            linalg::axpy(1.0, &da_z, &mut self.b_z.grad);
            linalg::matmul_at_acc(x, &da_r, &mut self.w_r.grad, 1, self.input_dim, h_dim);
            linalg::matmul_at_acc(h_prev, &da_r, &mut self.u_r.grad, 1, h_dim, h_dim);
            linalg::axpy(1.0, &da_r, &mut self.b_r.grad);
            linalg::matmul_at_acc(x, &da_n, &mut self.w_n.grad, 1, self.input_dim, h_dim);
            linalg::matmul_at_acc(h_prev, &dq, &mut self.u_n.grad, 1, h_dim, h_dim);
            linalg::axpy(1.0, &dq, &mut self.b_n.grad);

            // Input and carried hidden gradients.
            let gx = &mut grad_xs[t];
            linalg::matmul_bt_acc(&da_z, &self.w_z.value, gx, 1, h_dim, self.input_dim);
            linalg::matmul_bt_acc(&da_r, &self.w_r.value, gx, 1, h_dim, self.input_dim);
            linalg::matmul_bt_acc(&da_n, &self.w_n.value, gx, 1, h_dim, self.input_dim);
            linalg::matmul_bt_acc(&da_z, &self.u_z.value, &mut dh_prev, 1, h_dim, h_dim);
            linalg::matmul_bt_acc(&da_r, &self.u_r.value, &mut dh_prev, 1, h_dim, h_dim);
            linalg::matmul_bt_acc(&dq, &self.u_n.value, &mut dh_prev, 1, h_dim, h_dim);

            dh_next = dh_prev;
        }
    }
}

/// Raster student encoder: three conv stages, bidirectional GRU, projection.
pub struct StudentModel {
    pub config: StudentConfig,
    conv: Vec<ConvStage>,
    gru_fwd: GruDirection,
    gru_bwd: GruDirection,
    proj_w: Param,
    proj_b: Param,
}

pub struct StudentCache {
    /// Per-frame inputs to each conv stage (stage 0 input is the raster).
    stage_inputs: Vec<Vec<Vec<f64>>>,
    /// Per-frame post-ReLU outputs of each stage.
    stage_outputs: Vec<Vec<Vec<f64>>>,
    /// Per-frame pooled conv features.
    conv_feats: Vec<Vec<f64>>,
    gru_fwd: GruCache,
    gru_bwd: GruCache,
    /// Concatenated bidirectional states per frame.
    joint: Vec<Vec<f64>>,
}

impl StudentModel {
    pub fn new(config: &StudentConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let [c1, c2, c3] = config.conv_channels;
        let conv = vec![
            ConvStage::new(0, RASTER_CHANNELS, c1, &mut rng),
            ConvStage::new(1, c1, c2, &mut rng),
            ConvStage::new(2, c2, c3, &mut rng),
        ];
        let gru_fwd = GruDirection::new("fwd", c3, config.gru_hidden, &mut rng);
        let gru_bwd = GruDirection::new("bwd", c3, config.gru_hidden, &mut rng);
        let joint = 2 * config.gru_hidden;
        let bound = 1.0 / (joint as f64).sqrt();
        let mut proj_w = Param::zeros("stu.proj.weight", vec![joint, config.output_dim]);
        for v in proj_w.value.iter_mut() {
            *v = rng.random_range(-bound..bound);
        }
        let proj_b = Param::zeros("stu.proj.bias", vec![config.output_dim]);
        Self {
            config: config.clone(),
            conv,
            gru_fwd,
            gru_bwd,
            proj_w,
            proj_b,
        }
    }

    /// Frozen visual feature extractor parameters (the conv stages).
    pub fn encoder_params(&self) -> Vec<&Param> {
        self.conv
            .iter()
            .flat_map(|c| [&c.weight, &c.bias])
            .collect()
    }

    /// Temporal block and projection parameters (fine-tunable).
    pub fn temporal_params(&self) -> Vec<&Param> {
        let mut out = self.gru_fwd.params();
        out.extend(self.gru_bwd.params());
        out.push(&self.proj_w);
        out.push(&self.proj_b);
        out
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut out = self.encoder_params();
        out.extend(self.temporal_params());
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out: Vec<&mut Param> = Vec::new();
        for c in &mut self.conv {
            out.push(&mut c.weight);
            out.push(&mut c.bias);
        }
        out.extend(self.gru_fwd.params_mut());
        out.extend(self.gru_bwd.params_mut());
        out.push(&mut self.proj_w);
        out.push(&mut self.proj_b);
        out
    }

    /// Mutable temporal/projection parameters, matching `temporal_params`.
    pub fn temporal_params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = self.gru_fwd.params_mut();
        out.extend(self.gru_bwd.params_mut());
        out.push(&mut self.proj_w);
        out.push(&mut self.proj_b);
        out
    }

    pub fn manifest(&self) -> Manifest {
        self.params()
            .iter()
            .map(|p| (p.name.clone(), p.shape.clone()))
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn forward(&self, raster: &RasterClip) -> (FrameEmbeddings, StudentCache) {
        assert_eq!(raster.height, self.config.image_size);
        assert_eq!(raster.width, self.config.image_size);
        let t = raster.frames;
        let mut sizes = vec![self.config.image_size];
        for _ in 0..3 {
            sizes.push(ConvStage::out_size(*sizes.last().unwrap()));
        }

        let mut stage_inputs: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(t); 3];
        let mut stage_outputs: Vec<Vec<Vec<f64>>> = vec![Vec::with_capacity(t); 3];
        let mut conv_feats: Vec<Vec<f64>> = Vec::with_capacity(t);
        for ti in 0..t {
            let mut current = raster.frame(ti).to_vec();
            for (s, stage) in self.conv.iter().enumerate() {
                let out = stage.forward(&current, sizes[s], sizes[s]);
                stage_inputs[s].push(current);
                stage_outputs[s].push(out.clone());
                current = out;
            }
            // Global average pool over the final spatial grid.
            let c3 = self.config.conv_channels[2];
            let area = sizes[3] * sizes[3];
            let feat: Vec<f64> = (0..c3)
                .map(|c| current[c * area..(c + 1) * area].iter().sum::<f64>() / area as f64)
                .collect();
            conv_feats.push(feat);
        }

        let forward_order: Vec<usize> = (0..t).collect();
        let backward_order: Vec<usize> = (0..t).rev().collect();
        let (states_fwd, cache_fwd) = self.gru_fwd.forward(&conv_feats, &forward_order);
        let (states_bwd, cache_bwd) = self.gru_bwd.forward(&conv_feats, &backward_order);

        let h = self.config.gru_hidden;
        let d = self.config.output_dim;
        let mut joint: Vec<Vec<f64>> = Vec::with_capacity(t);
        let mut emb = FrameEmbeddings::zeros(t, d);
        for ti in 0..t {
            let mut j = Vec::with_capacity(2 * h);
            j.extend_from_slice(&states_fwd[ti]);
            // Backward direction ran in reverse order; state for frame ti
            // sits at position t-1-ti.
            j.extend_from_slice(&states_bwd[t - 1 - ti]);
            let mut out = self.proj_b.value.clone();
            linalg::matmul_acc(&j, &self.proj_w.value, &mut out, 1, 2 * h, d);
            emb.data[ti * d..(ti + 1) * d].copy_from_slice(&out);
            joint.push(j);
        }

        (
            emb,
            StudentCache {
                stage_inputs,
                stage_outputs,
                conv_feats,
                gru_fwd: cache_fwd,
                gru_bwd: cache_bwd,
                joint,
            },
        )
    }

    /// Inference-only forward.
    pub fn embed(&self, raster: &RasterClip) -> FrameEmbeddings {
        self.forward(raster).0
    }

    /// Backward from embedding gradients. When `train_encoder` is false the
    /// conv stages receive no gradient (frozen visual extractor).
    pub fn backward(
        &mut self,
        cache: &StudentCache,
        grad_emb: &[f64],
        train_encoder: bool,
    ) {
        let t = cache.conv_feats.len();
        let h = self.config.gru_hidden;
        let d = self.config.output_dim;
        let c3 = self.config.conv_channels[2];
        debug_assert_eq!(grad_emb.len(), t * d);

        // Projection backward.
        let mut grad_joint: Vec<Vec<f64>> = vec![vec![0.0; 2 * h]; t];
        for ti in 0..t {
            let g = &grad_emb[ti * d..(ti + 1) * d];
            linalg::matmul_at_acc(&cache.joint[ti], g, &mut self.proj_w.grad, 1, 2 * h, d);
            linalg::axpy(1.0, g, &mut self.proj_b.grad);
            linalg::matmul_bt_acc(g, &self.proj_w.value, &mut grad_joint[ti], 1, d, 2 * h);
        }

        // Split the joint gradient back into per-direction state gradients.
        let forward_order: Vec<usize> = (0..t).collect();
        let backward_order: Vec<usize> = (0..t).rev().collect();
        let grad_fwd_states: Vec<Vec<f64>> =
            (0..t).map(|ti| grad_joint[ti][..h].to_vec()).collect();
        let grad_bwd_states: Vec<Vec<f64>> = (0..t)
            .map(|step| grad_joint[t - 1 - step][h..].to_vec())
            .collect();

        let mut grad_feats: Vec<Vec<f64>> = vec![vec![0.0; c3]; t];
        self.gru_fwd.backward(
            &cache.conv_feats,
            &forward_order,
            &cache.gru_fwd,
            &grad_fwd_states,
            &mut grad_feats,
        );
        self.gru_bwd.backward(
            &cache.conv_feats,
            &backward_order,
            &cache.gru_bwd,
            &grad_bwd_states,
            &mut grad_feats,
        );

        if !train_encoder {
            return;
        }

        // Conv backward per frame: un-pool, then walk the stages in reverse.
        let mut sizes = vec![self.config.image_size];
        for _ in 0..3 {
            sizes.push(ConvStage::out_size(*sizes.last().unwrap()));
        }
        let area = sizes[3] * sizes[3];
        for ti in 0..t {
            let mut grad_stage = vec![0.0; c3 * area];
            for c in 0..c3 {
                let g = grad_feats[ti][c] / area as f64;
                for v in grad_stage[c * area..(c + 1) * area].iter_mut() {
                    *v = g;
                }
            }
            for s in (0..3).rev() {
                let in_size = sizes[s];
                let mut grad_input =
                    vec![0.0; self.conv[s].c_in * in_size * in_size];
                self.conv[s].backward(
                    &cache.stage_inputs[s][ti],
                    &cache.stage_outputs[s][ti],
                    &mut grad_stage,
                    in_size,
                    in_size,
                    &mut grad_input,
                );
                grad_stage = grad_input;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_dim_matches_config() {
        let cfg = StudentConfig {
            image_size: 16,
            conv_channels: [4, 6, 8],
            gru_hidden: 5,
            output_dim: 12,
        };
        let student = StudentModel::new(&cfg, 0);
        let raster = RasterClip {
            frames: 3,
            height: 16,
            width: 16,
            data: vec![0.1; 3 * RASTER_CHANNELS * 256],
        };
        let emb = student.embed(&raster);
        assert_eq!((emb.frames, emb.dim), (3, 12));
        assert!(emb.is_finite());
    }

    #[test]
    fn manifest_covers_conv_gru_and_projection() {
        let student = StudentModel::new(&StudentConfig::default(), 1);
        let names: Vec<String> = student.manifest().into_iter().map(|(n, _)| n).collect();
        assert!(names.iter().any(|n| n == "stu.conv0.weight"));
        assert!(names.iter().any(|n| n == "stu.gru.fwd.u_n"));
        assert!(names.iter().any(|n| n == "stu.gru.bwd.w_z"));
        assert!(names.iter().any(|n| n == "stu.proj.weight"));
        // Encoder + temporal partition covers every parameter exactly once.
        assert_eq!(
            student.encoder_params().len() + student.temporal_params().len(),
            student.params().len()
        );
    }

    #[test]
    fn forward_is_deterministic() {
        let cfg = StudentConfig {
            image_size: 16,
            conv_channels: [3, 4, 5],
            gru_hidden: 4,
            output_dim: 6,
        };
        let student = StudentModel::new(&cfg, 2);
        let raster = RasterClip {
            frames: 4,
            height: 16,
            width: 16,
            data: (0..4 * RASTER_CHANNELS * 256)
                .map(|i| ((i * 37) % 101) as f64 / 101.0)
                .collect(),
        };
        assert_eq!(student.embed(&raster).data, student.embed(&raster).data);
    }
}
