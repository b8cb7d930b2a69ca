//! Decoupled-weight-decay adaptive-moment optimizer and the warm-up + cosine
//! learning-rate schedule.

use crate::net::Param;

#[derive(Debug, Clone)]
pub struct AdamWConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.01,
        }
    }
}

pub struct AdamW {
    cfg: AdamWConfig,
    steps: u64,
    /// First and second moment per parameter tensor, in parameter order.
    moments: Vec<(Vec<f64>, Vec<f64>)>,
}

impl AdamW {
    pub fn new(params: &[&Param], cfg: AdamWConfig) -> Self {
        Self {
            cfg,
            steps: 0,
            moments: params
                .iter()
                .map(|p| (vec![0.0; p.len()], vec![0.0; p.len()]))
                .collect(),
        }
    }

    /// One update over `params`, which must be the same tensors, in the same
    /// order, as at construction. Decay is decoupled and skipped for 1-D
    /// parameters (biases, normalization gains).
    pub fn step(&mut self, params: Vec<&mut Param>, lr: f64) {
        assert_eq!(params.len(), self.moments.len(), "parameter set changed");
        self.steps += 1;
        let t = self.steps as i32;
        let bias1 = 1.0 - self.cfg.beta1.powi(t);
        let bias2 = 1.0 - self.cfg.beta2.powi(t);
        for (param, (m, v)) in params.into_iter().zip(&mut self.moments) {
            debug_assert_eq!(param.len(), m.len());
            let decay = if param.shape.len() > 1 {
                self.cfg.weight_decay
            } else {
                0.0
            };
            for i in 0..param.value.len() {
                let g = param.grad[i];
                m[i] = self.cfg.beta1 * m[i] + (1.0 - self.cfg.beta1) * g;
                v[i] = self.cfg.beta2 * v[i] + (1.0 - self.cfg.beta2) * g * g;
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                param.value[i] -=
                    lr * (m_hat / (v_hat.sqrt() + self.cfg.epsilon) + decay * param.value[i]);
            }
        }
    }
}

/// Learning rate at `epoch` under linear warm-up followed by cosine
/// annealing that reaches exactly zero on the final epoch.
pub fn lr_at_epoch(epoch: usize, total_epochs: usize, warmup_epochs: usize, base_lr: f64) -> f64 {
    if warmup_epochs > 0 && epoch < warmup_epochs {
        return base_lr * (epoch + 1) as f64 / warmup_epochs as f64;
    }
    if total_epochs <= warmup_epochs {
        return base_lr;
    }
    let progress = (epoch + 1 - warmup_epochs) as f64 / (total_epochs - warmup_epochs) as f64;
    base_lr * 0.5 * (1.0 + (std::f64::consts::PI * progress.min(1.0)).cos())
}
