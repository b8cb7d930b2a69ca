//! Versioned checkpoint container: model kind tag, a model-specific metadata
//! blob, and the named parameter arrays. Loading refuses any manifest
//! mismatch between the file and the model being restored.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Manifest, Param};
use crate::{CoreError, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
pub struct SavedParam {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CheckpointFile {
    pub version: u32,
    pub model_kind: String,
    pub meta: serde_json::Value,
    pub params: Vec<SavedParam>,
}

/// Serializes `params` (teacher or student) under a model kind tag.
pub fn write_checkpoint(
    path: &Path,
    model_kind: &str,
    meta: serde_json::Value,
    params: &[&Param],
) -> Result<()> {
    let file = CheckpointFile {
        version: CHECKPOINT_VERSION,
        model_kind: model_kind.to_string(),
        meta,
        params: params
            .iter()
            .map(|p| SavedParam {
                name: p.name.clone(),
                shape: p.shape.clone(),
                data: p.value.clone(),
            })
            .collect(),
    };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, serde_json::to_string(&file).expect("checkpoint serializes"))?;
    Ok(())
}

/// Reads a checkpoint, checking version and model kind.
pub fn read_checkpoint(path: &Path, expected_kind: &str) -> Result<CheckpointFile> {
    let text = fs::read_to_string(path)
        .map_err(|e| CoreError::Checkpoint(format!("cannot read {}: {e}", path.display())))?;
    let file: CheckpointFile = serde_json::from_str(&text)
        .map_err(|e| CoreError::Checkpoint(format!("malformed checkpoint: {e}")))?;
    if file.version != CHECKPOINT_VERSION {
        return Err(CoreError::Checkpoint(format!(
            "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
            file.version
        )));
    }
    if file.model_kind != expected_kind {
        return Err(CoreError::Checkpoint(format!(
            "checkpoint holds a `{}` model, expected `{expected_kind}`",
            file.model_kind
        )));
    }
    Ok(file)
}

/// Copies saved values into `params`, refusing on any manifest mismatch
/// (missing entries, extra entries, renames, or reshapes).
pub fn apply_params(file: &CheckpointFile, params: Vec<&mut Param>) -> Result<()> {
    let file_manifest: Manifest = file
        .params
        .iter()
        .map(|p| (p.name.clone(), p.shape.clone()))
        .collect();
    let model_manifest: Manifest = params
        .iter()
        .map(|p| (p.name.clone(), p.shape.clone()))
        .collect();
    if file_manifest != model_manifest {
        return Err(CoreError::Checkpoint(format!(
            "parameter manifest mismatch: checkpoint has {} entries, model expects {}; \
             first divergence: {:?}",
            file_manifest.len(),
            model_manifest.len(),
            file_manifest
                .iter()
                .zip(&model_manifest)
                .find(|(a, b)| a != b)
        )));
    }
    for (saved, param) in file.params.iter().zip(params) {
        if saved.data.len() != param.value.len() {
            return Err(CoreError::Checkpoint(format!(
                "parameter `{}` has {} values, expected {}",
                saved.name,
                saved.data.len(),
                param.value.len()
            )));
        }
        param.value.copy_from_slice(&saved.data);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_mismatch_rejection() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let mut a = Param::zeros("a", vec![2, 2]);
        a.value = vec![1.0, 2.0, 3.0, 4.0];
        let b = Param::filled("b", vec![3], 0.5);
        write_checkpoint(&path, "test_kind", serde_json::json!({"d": 4}), &[&a, &b]).unwrap();

        let file = read_checkpoint(&path, "test_kind").unwrap();
        assert_eq!(file.meta["d"], 4);

        let mut a2 = Param::zeros("a", vec![2, 2]);
        let mut b2 = Param::zeros("b", vec![3]);
        apply_params(&file, vec![&mut a2, &mut b2]).unwrap();
        assert_eq!(a2.value, a.value);
        assert_eq!(b2.value, b.value);

        // Wrong kind.
        assert!(read_checkpoint(&path, "other_kind").is_err());

        // Manifest mismatch: renamed parameter.
        let mut renamed = Param::zeros("c", vec![2, 2]);
        assert!(apply_params(&file, vec![&mut renamed, &mut b2]).is_err());

        // Manifest mismatch: reshaped parameter.
        let mut reshaped = Param::zeros("a", vec![4]);
        assert!(apply_params(&file, vec![&mut reshaped, &mut b2]).is_err());
    }
}
