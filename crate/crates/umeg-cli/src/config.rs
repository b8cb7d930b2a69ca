//! Declarative run configuration: one TOML file with CLI flag overrides.
//! Every default reproduces the standard protocol shape (96-frame stride-2
//! windows, alpha 1/8, deltas {1,2,4}, fivefold foreground weighting,
//! three warm-up epochs with cosine annealing).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use umeg_core::distill::{DistillConfig, StudentConfig};
use umeg_core::graph::{EntityConfig, SportProfile};
use umeg_core::net::BlockConfig;
use umeg_core::spot::{DecodeConfig, TrainConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DataSection {
    pub dataset: PathBuf,
    pub entity_config: String,
    pub profile: String,
    pub eval_fraction: f64,
    /// Temporal tolerance in frames for F1.
    pub delta_tolerance: usize,
    /// When set, the tolerance is this many seconds converted per clip fps.
    pub delta_seconds: Option<f64>,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            dataset: PathBuf::from("dataset"),
            entity_config: "pose+ball+court".into(),
            profile: "racket".into(),
            eval_fraction: 0.2,
            delta_tolerance: 1,
            delta_seconds: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSection {
    pub k: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Label attached to summaries and plots.
    pub label: String,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            k: vec![15, 25, 50, 100],
            seeds: vec![0, 1, 2, 3, 4],
            label: "umeg".into(),
        }
    }
}

/// The complete declarative configuration.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct RunConfig {
    pub data: DataSection,
    pub model: BlockConfig,
    pub train: TrainConfig,
    pub decode: DecodeConfig,
    pub distill: DistillConfig,
    pub sweep: SweepSection,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let config: Self = toml::from_str(&text)
            .with_context(|| format!("malformed config {}", path.display()))?;
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn entity_config(&self) -> Result<EntityConfig> {
        Ok(EntityConfig::parse(&self.data.entity_config)?)
    }

    pub fn profile(&self) -> Result<SportProfile> {
        Ok(SportProfile::parse(&self.data.profile)?)
    }

    /// Student output dim must match the teacher embedding; fix it up unless
    /// explicitly overridden to something inconsistent.
    pub fn resolve(&mut self) -> Result<()> {
        self.model.validate()?;
        self.decode.validate()?;
        if self.sweep.k.is_empty() || self.sweep.seeds.is_empty() {
            bail!("sweep needs non-empty k and seeds lists");
        }
        let embed = self.model.embed_dim();
        if self.distill.student.output_dim != embed {
            self.distill.student = StudentConfig {
                output_dim: embed,
                ..self.distill.student.clone()
            };
        }
        Ok(())
    }
}

/// Resolves an output directory against the `UMEG_OUTPUT_ROOT` override:
/// relative paths land under the root when the variable is set.
pub fn resolve_output(path: &Path) -> PathBuf {
    if path.is_absolute() {
        return path.to_path_buf();
    }
    match std::env::var_os("UMEG_OUTPUT_ROOT") {
        Some(root) => PathBuf::from(root).join(path),
        None => path.to_path_buf(),
    }
}
