use std::time::Instant;
use umeg_core::data::{generate_synthetic, make_split, select_clips, SynthConfig};
use umeg_core::graph::{build_topology, EntityConfig, SportProfile};
use umeg_core::metrics::{aggregate, edit_score, match_events};
use umeg_core::net::{BlockConfig, UmegModel};
use umeg_core::spot::{predict_events, train, DecodeConfig, SpotterModel, TrainConfig};

fn main() {
    let synth = SynthConfig { num_clips: 60, frames_per_clip: 240, seed: 1, ..SynthConfig::default() };
    let clips = generate_synthetic(&synth).unwrap();
    let split = make_split(&clips, 40, 0, 0.2).unwrap();

    for (entity, deltas, label) in [
        (EntityConfig::PoseBallCourt, vec![1usize, 2, 4], "full"),
        (EntityConfig::Pose, vec![1, 2, 4], "pose-only"),
        (EntityConfig::PoseBallCourt, vec![1], "delta={1}"),
    ] {
        let topo = build_topology(&clips[0].layout, SportProfile::Racket, entity).unwrap();
        let config = BlockConfig { widths: vec![16, 24], deltas, refine_adjacency: true, ..BlockConfig::default() };
        let encoder = UmegModel::new(&topo, &config, 0).unwrap();
        let mut model = SpotterModel::new(encoder, 8, 0);
        let cfg = TrainConfig { seq_len: 48, stride: 1, epochs: 50, batch_size: 4, lr: 3e-3, seed: 0, ..TrainConfig::default() };
        let t0 = Instant::now();
        train(&mut model, &clips, &split, &cfg).unwrap();
        let eval_clips = select_clips(&clips, &split.eval_ids);
        let decode_cfg = DecodeConfig::default();
        let per_clip: Vec<_> = eval_clips.iter().map(|clip| {
            let pred = predict_events(&model, clip, &cfg, &decode_cfg).unwrap();
            (match_events(&pred, &clip.labels, 1), edit_score(&pred, &clip.labels))
        }).collect();
        let report = aggregate(&per_clip).unwrap();
        println!("{label}: {:?} F1@1={:.4} Edit={:.2}", t0.elapsed(), report.f1_evt, report.edit);
    }
}
