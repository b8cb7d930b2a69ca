//! Few-shot training of the graph spotter: seeded window sampling over the
//! labeled clips, AdamW with warm-up + cosine annealing, best-checkpoint
//! selection on a held-out validation slice, and full-clip prediction.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    decode, loss::loss_and_grads, lr_at_epoch, tile_starts, window_labels, window_sequence,
    window_span, AdamW, AdamWConfig, DecodeConfig, EventSequence, FrameScores, SpotHead,
    TrainConfig,
};
use crate::data::{select_clips, FewShotSplit, KeypointClip};
use crate::graph::{build_sequence, build_topology, GraphSequence};
use crate::net::{
    apply_params, read_checkpoint, write_checkpoint, BlockConfig, Param, UmegModel,
};
use crate::{CoreError, Result};

/// Graph encoder plus spotting heads: the trainable teacher.
pub struct SpotterModel {
    pub encoder: UmegModel,
    pub head: SpotHead,
}

impl SpotterModel {
    pub fn new(encoder: UmegModel, num_classes: usize, seed: u64) -> Self {
        let dim = encoder.embed_dim();
        Self {
            encoder,
            head: SpotHead::new(dim, num_classes, seed.wrapping_add(0x5EED)),
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        let mut out = self.encoder.params();
        out.extend(self.head.params());
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        let mut out = self.encoder.params_mut();
        out.extend(self.head.params_mut());
        out
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn snapshot(&self) -> Vec<Vec<f64>> {
        self.params().iter().map(|p| p.value.clone()).collect()
    }

    fn restore(&mut self, snapshot: &[Vec<f64>]) {
        for (p, saved) in self.params_mut().into_iter().zip(snapshot) {
            p.value.copy_from_slice(saved);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
}

impl TrainHistory {
    /// Columnar text: epoch, train_loss, val_loss, lr.
    pub fn to_table(&self) -> String {
        let mut out = String::from("epoch\ttrain_loss\tval_loss\tlr\n");
        for e in &self.epochs {
            out.push_str(&format!(
                "{}\t{:.6}\t{:.6}\t{:.8}\n",
                e.epoch, e.train_loss, e.val_loss, e.lr
            ));
        }
        out
    }
}

struct PreparedClip {
    seq: GraphSequence,
    labels: Vec<crate::data::EventLabel>,
}

fn prepare_clips(model: &SpotterModel, clips: &[&KeypointClip]) -> Result<Vec<PreparedClip>> {
    clips
        .iter()
        .map(|clip| {
            let seq = build_sequence(clip, &model.encoder.topology)?;
            Ok(PreparedClip {
                seq,
                labels: clip.labels.clone(),
            })
        })
        .collect()
}

/// Forward + loss + backward over one window; returns the window loss.
fn window_pass(
    model: &mut SpotterModel,
    prepared: &PreparedClip,
    start: usize,
    cfg: &TrainConfig,
    grad_scale: f64,
    update: bool,
) -> Result<f64> {
    let (win_seq, valid) = window_sequence(&prepared.seq, start, cfg.seq_len, cfg.stride);
    let labels = window_labels(&prepared.labels, start, cfg.seq_len, cfg.stride);
    let (emb, cache) = model.encoder.forward(&win_seq)?;
    let scores = model.head.forward(&emb);
    let out = loss_and_grads(&scores, &labels, cfg.foreground_weight, &valid, grad_scale);
    if update {
        let grad_emb = model
            .head
            .backward(&emb, &out.grad_loc_logit, &out.grad_cls_logits);
        model.encoder.backward(&win_seq, &cache, &grad_emb);
    }
    Ok(out.loss)
}

/// Splits the labeled ids into train and validation slices: 20% (at least 2
/// clips when possible) held out for checkpoint selection.
fn validation_split(labeled: &[String], val_fraction: f64, seed: u64) -> (Vec<String>, Vec<String>) {
    let k = labeled.len();
    let mut ids: Vec<String> = labeled.to_vec();
    ids.sort();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA11D_0F_5E1EC7);
    ids.shuffle(&mut rng);
    let want = (val_fraction * k as f64).ceil() as usize;
    let val_count = want.max(2).min(k.saturating_sub(1));
    let val = ids[..val_count].to_vec();
    let train = ids[val_count..].to_vec();
    (train, val)
}

/// Trains the spotter on the split's labeled clips. Returns the per-epoch
/// history; the model is left at the best-validation-loss checkpoint.
pub fn train(
    model: &mut SpotterModel,
    dataset: &[KeypointClip],
    split: &FewShotSplit,
    cfg: &TrainConfig,
) -> Result<TrainHistory> {
    cfg.validate(*model.encoder.config.deltas.last().unwrap_or(&1))?;
    if split.labeled_ids.is_empty() {
        return Err(CoreError::Config("split has no labeled clips".into()));
    }
    let (train_ids, val_ids) = validation_split(&split.labeled_ids, cfg.val_fraction, cfg.seed);
    let train_clips = select_clips(dataset, &train_ids);
    let val_clips = select_clips(dataset, &val_ids);
    if train_clips.is_empty() {
        return Err(CoreError::Config("validation split consumed every labeled clip".into()));
    }
    let train_prepared = prepare_clips(model, &train_clips)?;
    let val_prepared = if val_clips.is_empty() {
        prepare_clips(model, &train_clips)?
    } else {
        prepare_clips(model, &val_clips)?
    };

    let optimizer_cfg = AdamWConfig {
        weight_decay: cfg.weight_decay,
        ..AdamWConfig::default()
    };
    let mut optimizer = AdamW::new(&model.params(), optimizer_cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ split.seed);

    let span = window_span(cfg.seq_len, cfg.stride);
    let mut history = TrainHistory {
        epochs: Vec::with_capacity(cfg.epochs),
        best_epoch: 0,
        best_val_loss: f64::INFINITY,
    };
    let mut best_snapshot = model.snapshot();

    for epoch in 0..cfg.epochs {
        let lr = lr_at_epoch(epoch, cfg.epochs, cfg.warmup_epochs, cfg.lr);

        // Coverage-proportional random windows per clip.
        let mut windows: Vec<(usize, usize)> = Vec::new();
        for (ci, p) in train_prepared.iter().enumerate() {
            let frames = p.seq.frames;
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

        let mut epoch_loss = 0.0;
        for batch in windows.chunks(cfg.batch_size) {
            model.zero_grad();
            let scale = 1.0 / batch.len() as f64;
            for &(ci, start) in batch {
                let loss =
                    window_pass(model, &train_prepared[ci], start, cfg, scale, true)?;
                if !loss.is_finite() {
                    return Err(CoreError::Diverged { epoch, loss });
                }
                epoch_loss += loss;
            }
            optimizer.step(model.params_mut(), lr);
        }
        let train_loss = epoch_loss / windows.len().max(1) as f64;

        let val_loss = evaluate_loss(model, &val_prepared, cfg)?;
        if !val_loss.is_finite() {
            return Err(CoreError::Diverged { epoch, loss: val_loss });
        }
        if val_loss < history.best_val_loss {
            history.best_val_loss = val_loss;
            history.best_epoch = epoch;
            best_snapshot = model.snapshot();
        }
        history.epochs.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
            lr,
        });
    }

    model.restore(&best_snapshot);
    Ok(history)
}

/// Mean window loss over deterministically tiled windows (all phases).
fn evaluate_loss(
    model: &mut SpotterModel,
    prepared: &[PreparedClip],
    cfg: &TrainConfig,
) -> Result<f64> {
    let mut total = 0.0;
    let mut count = 0usize;
    for p in prepared {
        for start in tile_starts(p.seq.frames, cfg.seq_len, cfg.stride) {
            total += window_pass(model, p, start, cfg, 1.0, false)?;
            count += 1;
        }
    }
    Ok(total / count.max(1) as f64)
}

/// Full-clip scores: overlapped windows per stride phase, each frame scored
/// by the window that sees it most centrally.
pub fn predict_clip(
    model: &SpotterModel,
    clip: &KeypointClip,
    cfg: &TrainConfig,
) -> Result<FrameScores> {
    let seq = build_sequence(clip, &model.encoder.topology)?;
    let t = seq.frames;
    let c = model.head.classes;
    let mut event_prob = vec![0.0; t];
    let mut class_logits = vec![0.0; t * c];
    for (start, owned) in super::inference_windows(t, cfg.seq_len, cfg.stride) {
        let (win_seq, _valid) = window_sequence(&seq, start, cfg.seq_len, cfg.stride);
        let emb = model.encoder.embed(&win_seq)?;
        let scores = model.head.forward(&emb);
        for i in owned {
            let frame = start + i * cfg.stride;
            if frame < t {
                event_prob[frame] = scores.event_prob[i];
                class_logits[frame * c..(frame + 1) * c]
                    .copy_from_slice(&scores.class_logits[i * c..(i + 1) * c]);
            }
        }
    }
    Ok(FrameScores {
        frames: t,
        classes: c,
        event_prob,
        class_logits,
    })
}

/// Predicts and decodes one clip into an event sequence.
pub fn predict_events(
    model: &SpotterModel,
    clip: &KeypointClip,
    cfg: &TrainConfig,
    decode_cfg: &DecodeConfig,
) -> Result<EventSequence> {
    Ok(decode(&predict_clip(model, clip, cfg)?, decode_cfg))
}

const SPOTTER_KIND: &str = "umeg_spotter";

/// Saves encoder + heads with everything needed to rebuild them.
pub fn save_spotter(path: &std::path::Path, model: &SpotterModel) -> Result<()> {
    let meta = serde_json::json!({
        "block_config": model.encoder.config,
        "layout": model.encoder.topology.layout,
        "profile": model.encoder.topology.profile,
        "entity_config": model.encoder.topology.entity_config,
        "num_classes": model.head.classes,
    });
    write_checkpoint(path, SPOTTER_KIND, meta, &model.params())
}

/// Rebuilds a spotter from a checkpoint, refusing manifest mismatches.
pub fn load_spotter(path: &std::path::Path) -> Result<SpotterModel> {
    let file = read_checkpoint(path, SPOTTER_KIND)?;
    let meta = &file.meta;
    let block_config: BlockConfig = serde_json::from_value(meta["block_config"].clone())
        .map_err(|e| CoreError::Checkpoint(format!("bad block_config: {e}")))?;
    let layout = serde_json::from_value(meta["layout"].clone())
        .map_err(|e| CoreError::Checkpoint(format!("bad layout: {e}")))?;
    let profile = serde_json::from_value(meta["profile"].clone())
        .map_err(|e| CoreError::Checkpoint(format!("bad profile: {e}")))?;
    let entity_config = serde_json::from_value(meta["entity_config"].clone())
        .map_err(|e| CoreError::Checkpoint(format!("bad entity_config: {e}")))?;
    let num_classes: usize = serde_json::from_value(meta["num_classes"].clone())
        .map_err(|e| CoreError::Checkpoint(format!("bad num_classes: {e}")))?;
    let topology = build_topology(&layout, profile, entity_config)?;
    let encoder = UmegModel::new(&topology, &block_config, 0)?;
    let mut model = SpotterModel::new(encoder, num_classes, 0);
    apply_params(&file, model.params_mut())?;
    Ok(model)
}
