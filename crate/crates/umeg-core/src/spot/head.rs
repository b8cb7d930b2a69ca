//! Per-frame event localizer and classifier heads: two linear maps on the
//! frame embeddings, one squashed through a sigmoid into an event
//! probability, the other producing class logits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg;
use crate::net::{FrameEmbeddings, Param};

/// Per-frame scores: event presence probability and class logits.
#[derive(Debug, Clone)]
pub struct FrameScores {
    pub frames: usize,
    pub classes: usize,
    /// Event probability per frame, in (0, 1).
    pub event_prob: Vec<f64>,
    /// Row-major (frame, class) logits.
    pub class_logits: Vec<f64>,
}

pub struct SpotHead {
    pub dim: usize,
    pub classes: usize,
    pub loc_w: Param,
    pub loc_b: Param,
    pub cls_w: Param,
    pub cls_b: Param,
}

impl SpotHead {
    pub fn new(dim: usize, classes: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (dim as f64).sqrt();
        let mut loc_w = Param::zeros("head.loc.weight", vec![dim, 1]);
        for v in loc_w.value.iter_mut() {
            *v = rng.random_range(-bound..bound);
        }
        let mut cls_w = Param::zeros("head.cls.weight", vec![dim, classes]);
        for v in cls_w.value.iter_mut() {
            *v = rng.random_range(-bound..bound);
        }
        Self {
            dim,
            classes,
            loc_w,
            loc_b: Param::zeros("head.loc.bias", vec![1]),
            cls_w,
            cls_b: Param::zeros("head.cls.bias", vec![classes]),
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        vec![&self.loc_w, &self.loc_b, &self.cls_w, &self.cls_b]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        vec![
            &mut self.loc_w,
            &mut self.loc_b,
            &mut self.cls_w,
            &mut self.cls_b,
        ]
    }

    pub fn forward(&self, emb: &FrameEmbeddings) -> FrameScores {
        debug_assert_eq!(emb.dim, self.dim);
        let t = emb.frames;
        let mut event_prob = vec![0.0; t];
        for (ti, p) in event_prob.iter_mut().enumerate() {
            let z = linalg::dot(emb.frame(ti), &self.loc_w.value) + self.loc_b.value[0];
            // Clamp away float underflow so probabilities stay strictly
            // inside (0, 1) for any finite logit.
            *p = sigmoid(z).clamp(1e-12, 1.0 - 1e-12);
        }
        let mut class_logits = vec![0.0; t * self.classes];
        linalg::matmul_acc(&emb.data, &self.cls_w.value, &mut class_logits, t, self.dim, self.classes);
        for row in class_logits.chunks_exact_mut(self.classes) {
            for (l, &b) in row.iter_mut().zip(&self.cls_b.value) {
                *l += b;
            }
        }
        FrameScores {
            frames: t,
            classes: self.classes,
            event_prob,
            class_logits,
        }
    }

    /// Accumulates head gradients from per-frame logit gradients and returns
    /// the gradient with respect to the embeddings.
    pub fn backward(
        &mut self,
        emb: &FrameEmbeddings,
        grad_loc_logit: &[f64],
        grad_cls_logits: &[f64],
    ) -> Vec<f64> {
        let t = emb.frames;
        debug_assert_eq!(grad_loc_logit.len(), t);
        debug_assert_eq!(grad_cls_logits.len(), t * self.classes);
        let mut grad_emb = vec![0.0; t * self.dim];
        for ti in 0..t {
            let g = grad_loc_logit[ti];
            if g != 0.0 {
                let row = emb.frame(ti);
                for (c, &x) in row.iter().enumerate() {
                    self.loc_w.grad[c] += g * x;
                }
                self.loc_b.grad[0] += g;
                let out = &mut grad_emb[ti * self.dim..(ti + 1) * self.dim];
                linalg::axpy(g, &self.loc_w.value, out);
            }
        }
        linalg::matmul_at_acc(&emb.data, grad_cls_logits, &mut self.cls_w.grad, t, self.dim, self.classes);
        for row in grad_cls_logits.chunks_exact(self.classes) {
            for (g, &gv) in self.cls_b.grad.iter_mut().zip(row) {
                *g += gv;
            }
        }
        linalg::matmul_bt_acc(
            grad_cls_logits,
            &self.cls_w.value,
            &mut grad_emb,
            t,
            self.classes,
            self.dim,
        );
        grad_emb
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Forward pass of the spotting heads on frame embeddings.
pub fn head_forward(head: &SpotHead, emb: &FrameEmbeddings) -> FrameScores {
    head.forward(emb)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_embeddings_zero_heads_give_half_probability() {
        let mut head = SpotHead::new(8, 5, 0);
        for p in head.params_mut() {
            p.value.fill(0.0);
        }
        let emb = FrameEmbeddings::zeros(7, 8);
        let scores = head.forward(&emb);
        assert!(scores.event_prob.iter().all(|&p| p == 0.5));
        assert!(scores.class_logits.iter().all(|&l| l == 0.0));
    }

    #[test]
    fn shape_contract() {
        let head = SpotHead::new(16, 8, 1);
        let emb = FrameEmbeddings::zeros(96, 16);
        let scores = head.forward(&emb);
        assert_eq!(scores.event_prob.len(), 96);
        assert_eq!(scores.class_logits.len(), 96 * 8);
    }

    #[test]
    fn probabilities_strictly_inside_unit_interval() {
        let head = SpotHead::new(4, 3, 2);
        let mut emb = FrameEmbeddings::zeros(5, 4);
        for (i, v) in emb.data.iter_mut().enumerate() {
            *v = (i as f64 - 10.0) * 37.0;
        }
        let scores = head.forward(&emb);
        for &p in &scores.event_prob {
            assert!(p > 0.0 && p < 1.0);
        }
    }

    #[test]
    fn stable_sigmoid_extremes() {
        assert!(sigmoid(800.0) <= 1.0);
        assert!(sigmoid(-800.0) >= 0.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
    }
}
