//! Multimodal knowledge distillation: a frozen graph teacher supervises a
//! raster-input student through per-frame L2 feature matching on unlabeled
//! clips; spotting heads are then fine-tuned on the few labeled clips with
//! the visual extractor frozen.

mod raster;
mod student;

pub use raster::{render_frames, render_raster, RasterClip, RASTER_CHANNELS};
pub use student::{StudentCache, StudentConfig, StudentModel};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{select_clips, FewShotSplit, KeypointClip};
use crate::net::{
    apply_params, read_checkpoint, write_checkpoint, FrameEmbeddings, Param,
};
use crate::spot::{
    decode, loss_and_grads, lr_at_epoch, tile_starts, window_labels, window_span, AdamW,
    AdamWConfig, DecodeConfig, EventSequence, FrameScores, SpotHead, SpotterModel, TrainConfig,
};
use crate::{CoreError, Result};

/// Distillation and fine-tuning configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillConfig {
    pub epochs: usize,
    pub lr: f64,
    pub finetune_epochs: usize,
    pub finetune_lr: f64,
    pub batch_size: usize,
    pub student: StudentConfig,
    pub seed: u64,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            lr: 1e-4,
            finetune_epochs: 10,
            finetune_lr: 1e-3,
            batch_size: 4,
            student: StudentConfig::default(),
            seed: 0,
        }
    }
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lr <= 0.0 || self.finetune_lr <= 0.0 {
            return Err(CoreError::Config("distillation rates must be positive".into()));
        }
        if self.epochs == 0 || self.finetune_epochs == 0 {
            return Err(CoreError::Config("distillation epoch counts must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(CoreError::Config("batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// Per-frame L2 feature matching: `(1/T) * sum_t ||tch_t - stu_t||^2`.
pub fn feature_matching_loss(teacher: &FrameEmbeddings, student: &FrameEmbeddings) -> f64 {
    assert_eq!(
        (teacher.frames, teacher.dim),
        (student.frames, student.dim),
        "feature matching needs equal shapes"
    );
    let t = teacher.frames.max(1) as f64;
    teacher
        .data
        .iter()
        .zip(&student.data)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum::<f64>()
        / t
}

/// Loss restricted to valid frames plus the gradient on the student side.
fn feature_loss_and_grad(
    teacher: &FrameEmbeddings,
    student: &FrameEmbeddings,
    valid: &[bool],
    grad_scale: f64,
) -> (f64, Vec<f64>) {
    let d = teacher.dim;
    let n_valid = valid.iter().filter(|&&v| v).count().max(1) as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; student.data.len()];
    for (ti, &ok) in valid.iter().enumerate() {
        if !ok {
            continue;
        }
        for c in 0..d {
            let idx = ti * d + c;
            let diff = student.data[idx] - teacher.data[idx];
            loss += diff * diff;
            grad[idx] = grad_scale * 2.0 * diff / n_valid;
        }
    }
    (loss / n_valid, grad)
}

/// Mean per-frame feature distance `(1/T) * sum_t ||tch_t - stu_t||_2`.
pub fn mean_feature_distance(teacher: &FrameEmbeddings, student: &FrameEmbeddings) -> f64 {
    let d = teacher.dim;
    let t = teacher.frames.max(1);
    (0..t)
        .map(|ti| {
            teacher.frame(ti)
                .iter()
                .zip(&student.data[ti * d..(ti + 1) * d])
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .sum::<f64>()
        / t as f64
}

struct DistillClip<'a> {
    clip: &'a KeypointClip,
    seq: crate::graph::GraphSequence,
}

fn prepare_pool<'a>(
    teacher: &SpotterModel,
    clips: &[&'a KeypointClip],
) -> Result<Vec<DistillClip<'a>>> {
    clips
        .iter()
        .map(|clip| {
            Ok(DistillClip {
                clip,
                seq: crate::graph::build_sequence(clip, &teacher.encoder.topology)?,
            })
        })
        .collect()
}

/// Renders the raster window matching a dilated graph window.
fn raster_window(
    clip: &KeypointClip,
    start: usize,
    seq_len: usize,
    stride: usize,
    image: usize,
) -> (RasterClip, Vec<bool>) {
    let frames: Vec<usize> = (0..seq_len).map(|i| start + i * stride).collect();
    let valid: Vec<bool> = frames.iter().map(|&f| f < clip.frames.len()).collect();
    (render_frames(clip, &frames, image, image), valid)
}

/// One teacher-target/student pass over a window; returns the window loss.
fn distill_window_pass(
    teacher: &SpotterModel,
    student: &mut StudentModel,
    entry: &DistillClip,
    start: usize,
    cfg: &TrainConfig,
    image: usize,
    grad_scale: f64,
    update: bool,
) -> Result<f64> {
    let (win_seq, valid) =
        crate::spot::window_sequence(&entry.seq, start, cfg.seq_len, cfg.stride);
    let targets = teacher.encoder.embed(&win_seq)?;
    let (raster, _) = raster_window(entry.clip, start, cfg.seq_len, cfg.stride, image);
    if update {
        let (emb, cache) = student.forward(&raster);
        let (loss, grad) = feature_loss_and_grad(&targets, &emb, &valid, grad_scale);
        student.backward(&cache, &grad, true);
        Ok(loss)
    } else {
        let emb = student.embed(&raster);
        let (loss, _) = feature_loss_and_grad(&targets, &emb, &valid, 0.0);
        Ok(loss)
    }
}

/// Distills the frozen teacher into the student by minimizing the feature
/// matching loss over windows of the pool. The teacher is never mutated and
/// clip labels are never read. Returns the best-validation-loss student.
pub fn distill(
    teacher: &SpotterModel,
    student: &mut StudentModel,
    dataset: &[KeypointClip],
    pool_ids: &[String],
    train_cfg: &TrainConfig,
    cfg: &DistillConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if pool_ids.is_empty() {
        return Err(CoreError::Config("distillation pool is empty".into()));
    }
    if student.config.output_dim != teacher.encoder.embed_dim() {
        return Err(CoreError::Config(format!(
            "student output dim {} does not match teacher embedding dim {}",
            student.config.output_dim,
            teacher.encoder.embed_dim()
        )));
    }
    let clips = select_clips(dataset, pool_ids);
    let prepared = prepare_pool(teacher, &clips)?;

    // Hold out a slice of the pool for best-checkpoint selection.
    let (val_pool, train_pool): (&[DistillClip], &[DistillClip]) = if prepared.len() == 1 {
        (&prepared[..], &prepared[..])
    } else {
        prepared.split_at((prepared.len() / 5).max(1))
    };

    let image = cfg.student.image_size;
    let span = window_span(train_cfg.seq_len, train_cfg.stride);
    let mut optimizer = AdamW::new(
        &student.params(),
        AdamWConfig {
            weight_decay: 0.0,
            ..AdamWConfig::default()
        },
    );
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0xD157));

    let mut best_loss = f64::INFINITY;
    let mut best_snapshot: Vec<Vec<f64>> =
        student.params().iter().map(|p| p.value.clone()).collect();
    let mut val_history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let lr = lr_at_epoch(epoch, cfg.epochs, 0, cfg.lr);
        let mut windows: Vec<(usize, usize)> = Vec::new();
        for (ci, entry) in train_pool.iter().enumerate() {
            let frames = entry.seq.frames;
            let n_win = frames.div_ceil(span).max(1);
            for _ in 0..n_win {
                let start = if frames > span {
                    rng.random_range(0..=frames - span)
                } else {
                    0
                };
                windows.push((ci, start));
            }
        }
        windows.shuffle(&mut rng);

        for batch in windows.chunks(cfg.batch_size) {
            student.zero_grad();
            let scale = 1.0 / batch.len() as f64;
            for &(ci, start) in batch {
                let loss = distill_window_pass(
                    teacher, student, &train_pool[ci], start, train_cfg, image, scale, true,
                )?;
                if !loss.is_finite() {
                    return Err(CoreError::Diverged { epoch, loss });
                }
            }
            optimizer.step(student.params_mut(), lr);
        }

        // Deterministic validation over the held-out pool slice.
        let mut val_loss = 0.0;
        let mut count = 0usize;
        for entry in val_pool {
            for start in tile_starts(entry.seq.frames, train_cfg.seq_len, train_cfg.stride) {
                val_loss += distill_window_pass(
                    teacher, student, entry, start, train_cfg, image, 0.0, false,
                )?;
                count += 1;
            }
        }
        val_loss /= count.max(1) as f64;
        if val_loss < best_loss {
            best_loss = val_loss;
            best_snapshot = student.params().iter().map(|p| p.value.clone()).collect();
        }
        val_history.push(val_loss);
    }

    for (p, saved) in student.params_mut().into_iter().zip(&best_snapshot) {
        p.value.copy_from_slice(saved);
    }
    Ok(val_history)
}

/// The raster student with spotting heads: performs event spotting from
/// raster input alone, no graph at inference.
pub struct StudentSpotter {
    pub student: StudentModel,
    pub head: SpotHead,
}

impl StudentSpotter {
    pub fn new(student: StudentModel, num_classes: usize, seed: u64) -> Self {
        let dim = student.config.output_dim;
        Self {
            student,
            head: SpotHead::new(dim, num_classes, seed.wrapping_add(0x57D0)),
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut out = self.student.params();
        out.extend(self.head.params());
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = self.student.params_mut();
        out.extend(self.head.params_mut());
        out
    }

    /// Full-clip scores from raster input: overlapped windows per stride
    /// phase, each frame scored by the window that sees it most centrally.
    pub fn predict_clip(&self, clip: &KeypointClip, cfg: &TrainConfig) -> FrameScores {
        let t = clip.frames.len();
        let c = self.head.classes;
        let image = self.student.config.image_size;
        let mut event_prob = vec![0.0; t];
        let mut class_logits = vec![0.0; t * c];
        for (start, owned) in crate::spot::inference_windows(t, cfg.seq_len, cfg.stride) {
            let (raster, _) = raster_window(clip, start, cfg.seq_len, cfg.stride, image);
            let emb = self.student.embed(&raster);
            let scores = self.head.forward(&emb);
            for i in owned {
                let frame = start + i * cfg.stride;
                if frame < t {
                    event_prob[frame] = scores.event_prob[i];
                    class_logits[frame * c..(frame + 1) * c]
                        .copy_from_slice(&scores.class_logits[i * c..(i + 1) * c]);
                }
            }
        }
        FrameScores {
            frames: t,
            classes: c,
            event_prob,
            class_logits,
        }
    }

    pub fn predict_events(
        &self,
        clip: &KeypointClip,
        cfg: &TrainConfig,
        decode_cfg: &DecodeConfig,
    ) -> EventSequence {
        decode(&self.predict_clip(clip, cfg), decode_cfg)
    }
}

/// Trains a student spotter on the split's labeled clips. With
/// `train_encoder = false` this is the fine-tuning stage: the conv extractor
/// stays bit-identical and only the temporal block, localizer, and
/// classifier move. With `train_encoder = true` it trains from scratch.
pub fn train_student_spotter(
    spotter: &mut StudentSpotter,
    dataset: &[KeypointClip],
    split: &FewShotSplit,
    train_cfg: &TrainConfig,
    epochs: usize,
    lr: f64,
    batch_size: usize,
    train_encoder: bool,
    seed: u64,
) -> Result<Vec<f64>> {
    if split.labeled_ids.is_empty() {
        return Err(CoreError::Config("split has no labeled clips".into()));
    }
    let mut ids = split.labeled_ids.clone();
    ids.sort();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xF17E);
    ids.shuffle(&mut rng);
    let val_count = ((train_cfg.val_fraction * ids.len() as f64).ceil() as usize)
        .max(2)
        .min(ids.len().saturating_sub(1));
    let (val_ids, train_ids) = ids.split_at(val_count);
    let train_ids = if train_ids.is_empty() { val_ids } else { train_ids };
    let train_clips = select_clips(dataset, &train_ids.to_vec());
    let val_clips = select_clips(dataset, &val_ids.to_vec());

    let image = spotter.student.config.image_size;
    let span = window_span(train_cfg.seq_len, train_cfg.stride);

    // Optimizer over the trainable subset only.
    let trainable_count = |s: &StudentSpotter| {
        if train_encoder {
            s.params().len()
        } else {
            s.student.temporal_params().len() + s.head.params().len()
        }
    };
    let n_trainable = trainable_count(spotter);
    let initial: Vec<&Param> = if train_encoder {
        spotter.params()
    } else {
        let mut v = spotter.student.temporal_params();
        v.extend(spotter.head.params());
        v
    };
    debug_assert_eq!(initial.len(), n_trainable);
    let mut optimizer = AdamW::new(
        &initial,
        AdamWConfig {
            weight_decay: 0.01,
            ..AdamWConfig::default()
        },
    );

    let window_pass = |spotter: &mut StudentSpotter,
                       clip: &KeypointClip,
                       start: usize,
                       scale: f64,
                       update: bool|
     -> f64 {
        let (raster, valid) = raster_window(clip, start, train_cfg.seq_len, train_cfg.stride, image);
        let labels = window_labels(&clip.labels, start, train_cfg.seq_len, train_cfg.stride);
        let (emb, cache) = spotter.student.forward(&raster);
        let scores = spotter.head.forward(&emb);
        let out = loss_and_grads(&scores, &labels, train_cfg.foreground_weight, &valid, scale);
        if update {
            let grad_emb = spotter
                .head
                .backward(&emb, &out.grad_loc_logit, &out.grad_cls_logits);
            spotter.student.backward(&cache, &grad_emb, train_encoder);
        }
        out.loss
    };

    let mut best_loss = f64::INFINITY;
    let mut best_snapshot: Vec<Vec<f64>> =
        spotter.params().iter().map(|p| p.value.clone()).collect();
    let mut history = Vec::with_capacity(epochs);

    for epoch in 0..epochs {
        let epoch_lr = lr_at_epoch(epoch, epochs, 0, lr);
        let mut windows: Vec<(usize, usize)> = Vec::new();
        for (ci, clip) in train_clips.iter().enumerate() {
            let frames = clip.frames.len();
            let n_win = frames.div_ceil(span).max(1);
            for _ in 0..n_win {
                let start = if frames > span {
                    rng.random_range(0..=frames - span)
                } else {
                    0
                };
                windows.push((ci, start));
            }
        }
        windows.shuffle(&mut rng);

        for batch in windows.chunks(batch_size) {
            for p in spotter.params_mut() {
                p.zero_grad();
            }
            let scale = 1.0 / batch.len() as f64;
            for &(ci, start) in batch {
                let loss = window_pass(spotter, train_clips[ci], start, scale, true);
                if !loss.is_finite() {
                    return Err(CoreError::Diverged { epoch, loss });
                }
            }
            let params: Vec<&mut Param> = if train_encoder {
                spotter.params_mut()
            } else {
                let mut v = spotter.student.temporal_params_mut();
                v.extend(spotter.head.params_mut());
                v
            };
            optimizer.step(params, epoch_lr);
        }

        let mut val_loss = 0.0;
        let mut count = 0usize;
        let val_set: &[&KeypointClip] = if val_clips.is_empty() { &train_clips } else { &val_clips };
        for clip in val_set {
            for start in tile_starts(clip.frames.len(), train_cfg.seq_len, train_cfg.stride) {
                val_loss += window_pass(spotter, clip, start, 0.0, false);
                count += 1;
            }
        }
        val_loss /= count.max(1) as f64;
        if !val_loss.is_finite() {
            return Err(CoreError::Diverged { epoch, loss: val_loss });
        }
        if val_loss < best_loss {
            best_loss = val_loss;
            best_snapshot = spotter.params().iter().map(|p| p.value.clone()).collect();
        }
        history.push(val_loss);
    }

    for (p, saved) in spotter.params_mut().into_iter().zip(&best_snapshot) {
        p.value.copy_from_slice(saved);
    }
    Ok(history)
}

/// Fine-tunes fresh heads (and the recurrent temporal layer) on the labeled
/// clips; the distilled visual extractor stays frozen.
pub fn finetune_student(
    student: StudentModel,
    dataset: &[KeypointClip],
    split: &FewShotSplit,
    train_cfg: &TrainConfig,
    cfg: &DistillConfig,
    num_classes: usize,
) -> Result<StudentSpotter> {
    cfg.validate()?;
    let mut spotter = StudentSpotter::new(student, num_classes, cfg.seed);
    train_student_spotter(
        &mut spotter,
        dataset,
        split,
        train_cfg,
        cfg.finetune_epochs,
        cfg.finetune_lr,
        cfg.batch_size,
        false,
        cfg.seed,
    )?;
    Ok(spotter)
}

const STUDENT_KIND: &str = "umeg_student";
const STUDENT_SPOTTER_KIND: &str = "umeg_student_spotter";

/// Saves a distilled (head-less) student encoder.
pub fn save_student(path: &std::path::Path, student: &StudentModel) -> Result<()> {
    let meta = serde_json::json!({ "student": student.config });
    write_checkpoint(path, STUDENT_KIND, meta, &student.params())
}

pub fn load_student(path: &std::path::Path) -> Result<StudentModel> {
    let file = read_checkpoint(path, STUDENT_KIND)?;
    let config: StudentConfig = serde_json::from_value(file.meta["student"].clone())
        .map_err(|e| CoreError::Checkpoint(format!("bad student config: {e}")))?;
    let mut student = StudentModel::new(&config, 0);
    apply_params(&file, student.params_mut())?;
    Ok(student)
}

/// Saves a fine-tuned student spotter (encoder + heads).
pub fn save_student_spotter(path: &std::path::Path, spotter: &StudentSpotter) -> Result<()> {
    let meta = serde_json::json!({
        "student": spotter.student.config,
        "num_classes": spotter.head.classes,
    });
    write_checkpoint(path, STUDENT_SPOTTER_KIND, meta, &spotter.params())
}

pub fn load_student_spotter(path: &std::path::Path) -> Result<StudentSpotter> {
    let file = read_checkpoint(path, STUDENT_SPOTTER_KIND)?;
    let config: StudentConfig = serde_json::from_value(file.meta["student"].clone())
        .map_err(|e| CoreError::Checkpoint(format!("bad student config: {e}")))?;
    let num_classes: usize = serde_json::from_value(file.meta["num_classes"].clone())
        .map_err(|e| CoreError::Checkpoint(format!("bad num_classes: {e}")))?;
    let student = StudentModel::new(&config, 0);
    let mut spotter = StudentSpotter::new(student, num_classes, 0);
    apply_params(&file, spotter.params_mut())?;
    Ok(spotter)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emb(frames: usize, dim: usize, fill: impl Fn(usize) -> f64) -> FrameEmbeddings {
        let mut e = FrameEmbeddings::zeros(frames, dim);
        for (i, v) in e.data.iter_mut().enumerate() {
            *v = fill(i);
        }
        e
    }

    #[test]
    fn equal_features_give_zero_loss() {
        let a = emb(5, 8, |i| i as f64 * 0.1);
        assert_eq!(feature_matching_loss(&a, &a.clone()), 0.0);
    }

    #[test]
    fn all_ones_offset_gives_exactly_d() {
        let a = emb(7, 64, |i| (i as f64 * 0.37).sin());
        let mut b = a.clone();
        for v in b.data.iter_mut() {
            *v += 1.0;
        }
        let loss = feature_matching_loss(&a, &b);
        assert_eq!(loss, 64.0);
    }

    #[test]
    fn matches_scalar_loop_oracle() {
        let a = emb(5, 8, |i| ((i * 31 + 7) % 17) as f64 / 17.0);
        let b = emb(5, 8, |i| ((i * 13 + 3) % 23) as f64 / 23.0);
        let fast = feature_matching_loss(&a, &b);
        // Elementwise loop oracle.
        let mut oracle = 0.0;
        for t in 0..5 {
            let mut norm_sq = 0.0;
            for c in 0..8 {
                let d = a.data[t * 8 + c] - b.data[t * 8 + c];
                norm_sq += d * d;
            }
            oracle += norm_sq;
        }
        oracle /= 5.0;
        assert!((fast - oracle).abs() < 1e-9);
    }

    #[test]
    fn loss_is_symmetric_and_quadratic_in_scale() {
        let a = emb(4, 6, |i| (i as f64).cos());
        let b = emb(4, 6, |i| (i as f64 * 0.5).sin());
        assert_eq!(feature_matching_loss(&a, &b), feature_matching_loss(&b, &a));
        let mut a2 = a.clone();
        let mut b2 = b.clone();
        for v in a2.data.iter_mut() {
            *v *= 3.0;
        }
        for v in b2.data.iter_mut() {
            *v *= 3.0;
        }
        let base = feature_matching_loss(&a, &b);
        let scaled = feature_matching_loss(&a2, &b2);
        assert!((scaled - 9.0 * base).abs() < 1e-9 * scaled.abs().max(1.0));
    }

    #[test]
    fn feature_grad_matches_finite_differences() {
        let teacher = emb(3, 4, |i| (i as f64 * 0.77).sin());
        let student = emb(3, 4, |i| (i as f64 * 0.33).cos());
        let valid = vec![true, false, true];
        let (_, grad) = feature_loss_and_grad(&teacher, &student, &valid, 1.0);
        let h = 1e-7;
        for i in 0..student.data.len() {
            let mut plus = student.clone();
            plus.data[i] += h;
            let mut minus = student.clone();
            minus.data[i] -= h;
            let lp = feature_loss_and_grad(&teacher, &plus, &valid, 0.0).0;
            let lm = feature_loss_and_grad(&teacher, &minus, &valid, 0.0).0;
            let numeric = (lp - lm) / (2.0 * h);
            assert!(
                (numeric - grad[i]).abs() < 1e-6,
                "entry {i}: numeric {numeric} vs analytic {}",
                grad[i]
            );
        }
    }
}
