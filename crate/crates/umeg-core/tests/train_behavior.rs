//! Training-loop behavior: receptive-field bound, single-step descent, and
//! seed reproducibility.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use umeg_core::data::{generate_synthetic, make_split, select_clips, EventLabel, SynthConfig};
use umeg_core::graph::{build_sequence, build_topology, EntityConfig, SportProfile};
use umeg_core::metrics::{edit_score, match_events};
use umeg_core::net::{BlockConfig, UmegModel};
use umeg_core::spot::{
    loss_and_grads, predict_events, train, AdamW, AdamWConfig, DecodeConfig, SpotterModel,
    TrainConfig,
};

fn small_dataset(clips: usize, frames: usize, seed: u64) -> Vec<umeg_core::data::KeypointClip> {
    generate_synthetic(&SynthConfig {
        num_clips: clips,
        frames_per_clip: frames,
        gap_min: 10,
        gap_max: 20,
        seed,
        ..SynthConfig::default()
    })
    .unwrap()
}

#[test]
fn single_frame_perturbation_stays_inside_the_receptive_cone() {
    let clips = small_dataset(1, 64, 1);
    let topo = build_topology(&clips[0].layout, SportProfile::Racket, EntityConfig::PoseBallCourt)
        .unwrap();
    let config = BlockConfig {
        widths: vec![12, 12],
        deltas: vec![1, 2, 4],
        refine_adjacency: true,
        ..BlockConfig::default()
    };
    let radius = config.receptive_radius();
    assert_eq!(radius, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for trial in 0..5 {
        let model = UmegModel::new(&topo, &config, trial).unwrap();
        let seq = build_sequence(&clips[0], &topo).unwrap();
        let base = model.embed(&seq).unwrap();
        let t_perturbed = rng.random_range(0..seq.frames);
        let mut perturbed = seq.clone();
        let v = topo.node_count;
        for node in 0..v {
            perturbed.coords[(t_perturbed * v + node) * 2] += 0.37;
        }
        let out = model.embed(&perturbed).unwrap();
        for t in 0..seq.frames {
            let changed = base
                .frame(t)
                .iter()
                .zip(out.frame(t))
                .any(|(a, b)| a != b);
            let inside = t.abs_diff(t_perturbed) <= radius;
            if !inside {
                assert!(
                    !changed,
                    "trial {trial}: frame {t} changed outside the cone around {t_perturbed}"
                );
            }
        }
    }
}

#[test]
fn one_small_step_decreases_the_window_loss() {
    let clips = small_dataset(2, 64, 3);
    let topo = build_topology(&clips[0].layout, SportProfile::Racket, EntityConfig::PoseBallCourt)
        .unwrap();
    let config = BlockConfig {
        widths: vec![8, 8],
        refine_adjacency: false,
        ..BlockConfig::default()
    };
    let encoder = UmegModel::new(&topo, &config, 11).unwrap();
    let mut model = SpotterModel::new(encoder, 8, 11);
    let seq = build_sequence(&clips[0], &topo).unwrap();
    let labels: Vec<EventLabel> = clips[0].labels.clone();
    let valid = vec![true; seq.frames];

    let loss_of = |model: &SpotterModel| {
        let emb = model.encoder.embed(&seq).unwrap();
        let scores = model.head.forward(&emb);
        loss_and_grads(&scores, &labels, 5.0, &valid, 1.0).loss
    };

    let before = loss_of(&model);
    model.zero_grad();
    let (emb, cache) = model.encoder.forward(&seq).unwrap();
    let scores = model.head.forward(&emb);
    let out = loss_and_grads(&scores, &labels, 5.0, &valid, 1.0);
    let grad_emb = model
        .head
        .backward(&emb, &out.grad_loc_logit, &out.grad_cls_logits);
    model.encoder.backward(&seq, &cache, &grad_emb);
    let mut optimizer = AdamW::new(
        &model.params(),
        AdamWConfig { weight_decay: 0.0, ..AdamWConfig::default() },
    );
    optimizer.step(model.params_mut(), 1e-5);
    let after = loss_of(&model);
    assert!(after < before, "loss did not decrease: {before} -> {after}");
}

#[test]
fn training_is_reproducible_for_a_fixed_seed() {
    let clips = small_dataset(8, 72, 5);
    let split = make_split(&clips, 5, 2, 0.25).unwrap();
    let topo = build_topology(&clips[0].layout, SportProfile::Racket, EntityConfig::PoseBallCourt)
        .unwrap();
    let config = BlockConfig {
        widths: vec![8, 8],
        refine_adjacency: true,
        ..BlockConfig::default()
    };
    let cfg = TrainConfig {
        seq_len: 24,
        stride: 1,
        epochs: 3,
        batch_size: 2,
        lr: 1e-3,
        seed: 7,
        ..TrainConfig::default()
    };

    let run = || {
        let encoder = UmegModel::new(&topo, &config, 1).unwrap();
        let mut model = SpotterModel::new(encoder, 8, 1);
        let history = train(&mut model, &clips, &split, &cfg).unwrap();
        let eval = select_clips(&clips, &split.eval_ids);
        let decode_cfg = DecodeConfig::default();
        let per_clip: Vec<_> = eval
            .iter()
            .map(|clip| {
                let pred = predict_events(&model, clip, &cfg, &decode_cfg).unwrap();
                (match_events(&pred, &clip.labels, 1), edit_score(&pred, &clip.labels))
            })
            .collect();
        let weights: Vec<Vec<f64>> = model.params().iter().map(|p| p.value.clone()).collect();
        (history, per_clip, weights)
    };

    let (h1, m1, w1) = run();
    let (h2, m2, w2) = run();
    assert_eq!(h1, h2, "histories diverged");
    assert_eq!(m1, m2, "eval results diverged");
    assert_eq!(w1, w2, "final weights diverged");
}

#[test]
fn training_requires_labeled_clips() {
    let clips = small_dataset(4, 64, 6);
    let mut split = make_split(&clips, 2, 0, 0.25).unwrap();
    split.labeled_ids.clear();
    let topo = build_topology(&clips[0].layout, SportProfile::Racket, EntityConfig::PoseBallCourt)
        .unwrap();
    let config = BlockConfig {
        widths: vec![8],
        refine_adjacency: false,
        ..BlockConfig::default()
    };
    let encoder = UmegModel::new(&topo, &config, 0).unwrap();
    let mut model = SpotterModel::new(encoder, 8, 0);
    let cfg = TrainConfig {
        seq_len: 16,
        stride: 1,
        epochs: 1,
        ..TrainConfig::default()
    };
    assert!(train(&mut model, &clips, &split, &cfg).is_err());
}

#[test]
fn checkpoint_roundtrip_preserves_predictions() {
    let clips = small_dataset(4, 64, 8);
    let split = make_split(&clips, 3, 1, 0.25).unwrap();
    let topo = build_topology(&clips[0].layout, SportProfile::Racket, EntityConfig::PoseBallCourt)
        .unwrap();
    let config = BlockConfig {
        widths: vec![8, 8],
        refine_adjacency: true,
        ..BlockConfig::default()
    };
    let encoder = UmegModel::new(&topo, &config, 2).unwrap();
    let mut model = SpotterModel::new(encoder, 8, 2);
    let cfg = TrainConfig {
        seq_len: 24,
        stride: 2,
        epochs: 2,
        batch_size: 2,
        seed: 3,
        ..TrainConfig::default()
    };
    train(&mut model, &clips, &split, &cfg).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("spotter.ckpt");
    umeg_core::spot::save_spotter(&path, &model).unwrap();
    let restored = umeg_core::spot::load_spotter(&path).unwrap();

    let decode_cfg = DecodeConfig::default();
    for clip in &clips {
        let a = predict_events(&model, clip, &cfg, &decode_cfg).unwrap();
        let b = predict_events(&restored, clip, &cfg, &decode_cfg).unwrap();
        assert_eq!(a, b);
    }

    // A mismatched architecture refuses to load.
    let other_topo =
        build_topology(&clips[0].layout, SportProfile::Racket, EntityConfig::Pose).unwrap();
    let other = UmegModel::new(&other_topo, &config, 0).unwrap();
    let mut other = SpotterModel::new(other, 8, 0);
    let file = umeg_core::net::read_checkpoint(&path, "umeg_spotter").unwrap();
    assert!(umeg_core::net::apply_params(&file, other.params_mut()).is_err());
}
