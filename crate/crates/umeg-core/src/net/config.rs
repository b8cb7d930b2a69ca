//! Block-stack configuration.

use serde::{Deserialize, Serialize};

use crate::{CoreError, Result};

/// Configuration of the UMEG block stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockConfig {
    /// Hidden width per block; the length is the number of blocks L.
    pub widths: Vec<usize>,
    /// Fraction of channels moved in each temporal direction.
    pub alpha: f64,
    /// Temporal shift offsets, strictly ascending.
    pub deltas: Vec<usize>,
    /// Learnable additive adjacency refinement inside each block.
    pub refine_adjacency: bool,
    /// Replaces the temporal shift with the identity map (ablation hook;
    /// the parameter manifest is unaffected either way).
    pub identity_shift: bool,
}

impl Default for BlockConfig {
    fn default() -> Self {
        Self {
            widths: vec![64, 64, 128, 128],
            alpha: 1.0 / 8.0,
            deltas: vec![1, 2, 4],
            refine_adjacency: true,
            identity_shift: false,
        }
    }
}

impl BlockConfig {
    pub fn num_blocks(&self) -> usize {
        self.widths.len()
    }

    /// Width of the final per-frame embedding.
    pub fn embed_dim(&self) -> usize {
        *self.widths.last().expect("validated config has blocks")
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() {
            return Err(CoreError::Config("at least one UMEG block is required".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 0.5) {
            return Err(CoreError::Config(format!(
                "shift fraction alpha must lie in (0, 1/2], got {}",
                self.alpha
            )));
        }
        if self.deltas.is_empty() {
            return Err(CoreError::Config("delta set must be non-empty".into()));
        }
        if self.deltas[0] == 0 || self.deltas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CoreError::Config(format!(
                "deltas must be strictly ascending positive integers, got {:?}",
                self.deltas
            )));
        }
        for &d in &self.widths {
            if d < self.deltas.len() {
                return Err(CoreError::Config(format!(
                    "hidden width {d} is smaller than the delta count {}",
                    self.deltas.len()
                )));
            }
        }
        Ok(())
    }

    /// Temporal radius a single frame can influence through the stack.
    pub fn receptive_radius(&self) -> usize {
        self.deltas.last().copied().unwrap_or(0) * self.num_blocks()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        let cfg = BlockConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.embed_dim(), 128);
        assert_eq!(cfg.receptive_radius(), 16);
    }

    #[test]
    fn rejects_bad_fields() {
        let mut cfg = BlockConfig::default();
        cfg.alpha = 0.6;
        assert!(cfg.validate().is_err());

        let mut cfg = BlockConfig::default();
        cfg.deltas = vec![1, 1, 2];
        assert!(cfg.validate().is_err());

        let mut cfg = BlockConfig::default();
        cfg.deltas = vec![2, 1];
        assert!(cfg.validate().is_err());

        let mut cfg = BlockConfig::default();
        cfg.widths = vec![2];
        assert!(cfg.validate().is_err());

        let mut cfg = BlockConfig::default();
        cfg.widths.clear();
        assert!(cfg.validate().is_err());
    }
}
