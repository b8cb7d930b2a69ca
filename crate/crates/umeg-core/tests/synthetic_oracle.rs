//! The rule-based decoder: reads only keypoints and recovers the synthetic
//! labels exactly on noiseless clips, plus dataset round-trip and split
//! reproducibility checks.

use umeg_core::data::{
    generate_synthetic, load_dataset, make_split, save_dataset, EventLabel, KeypointClip,
    SynthConfig, SYNTH_SPEED_THRESHOLD,
};
use umeg_core::graph::coco;
use umeg_core::metrics::f1_at_tolerance;

/// Keypoint-only event decoder: a frame is an event iff some wrist coincides
/// exactly with the ball; the class comes from (player, wrist above/below
/// that player's hip, incoming horizontal speed bucket).
fn rule_decode(clip: &KeypointClip) -> Vec<EventLabel> {
    let layout = &clip.layout;
    let ball = layout.ball_index().expect("rally clips carry a ball");
    let mut events = Vec::new();
    for (t, frame) in clip.frames.iter().enumerate().skip(1) {
        let ball_pos = frame.coords[ball];
        if !frame.detected[ball] {
            continue;
        }
        for person in 0..layout.num_persons {
            for wrist in [coco::LEFT_WRIST, coco::RIGHT_WRIST] {
                let node = layout.person_joint_index(person, wrist);
                let wrist_pos = frame.coords[node];
                if !frame.detected[node] || wrist_pos != ball_pos {
                    continue;
                }
                let hip_left = frame.coords[layout.person_joint_index(person, coco::LEFT_HIP)];
                let hip_right = frame.coords[layout.person_joint_index(person, coco::RIGHT_HIP)];
                let hip_y = 0.5 * (hip_left[1] + hip_right[1]);
                let above = wrist_pos[1] < hip_y;
                let vx = ball_pos[0] - clip.frames[t - 1].coords[ball][0];
                let fast = vx.abs() > SYNTH_SPEED_THRESHOLD;
                events.push(EventLabel {
                    class_id: person * 4 + usize::from(above) * 2 + usize::from(fast),
                    frame: t,
                });
            }
        }
    }
    events.dedup_by_key(|e| e.frame);
    events
}

#[test]
fn rule_decoder_recovers_noiseless_labels_perfectly() {
    let cfg = SynthConfig {
        num_clips: 20,
        frames_per_clip: 240,
        seed: 77,
        ..SynthConfig::default()
    };
    let clips = generate_synthetic(&cfg).unwrap();
    for clip in &clips {
        let decoded = rule_decode(clip);
        assert_eq!(decoded, clip.labels, "clip {}", clip.clip_id);
        let (_, f1) = f1_at_tolerance(&decoded, &clip.labels, 1);
        assert_eq!(f1, 1.0);
    }
}

#[test]
fn dataset_roundtrip_is_byte_identical() {
    let cfg = SynthConfig {
        num_clips: 5,
        frames_per_clip: 120,
        noise_sigma: 0.01,
        miss_prob: 0.05,
        seed: 3,
        ..SynthConfig::default()
    };
    let clips = generate_synthetic(&cfg).unwrap();
    let dir_a = tempfile::tempdir().unwrap();
    save_dataset(&clips, dir_a.path()).unwrap();
    let loaded = load_dataset(dir_a.path()).unwrap();
    assert_eq!(loaded, clips);
    let dir_b = tempfile::tempdir().unwrap();
    save_dataset(&loaded, dir_b.path()).unwrap();
    for clip in &clips {
        let name = format!("{}.jsonl", clip.clip_id);
        let a = std::fs::read(dir_a.path().join(&name)).unwrap();
        let b = std::fs::read(dir_b.path().join(&name)).unwrap();
        assert_eq!(a, b, "{name} changed across save/load/save");
    }
}

#[test]
fn splits_reproduce_across_processes_and_differ_across_seeds() {
    let cfg = SynthConfig {
        num_clips: 200,
        frames_per_clip: 60,
        gap_min: 10,
        gap_max: 20,
        seed: 5,
        ..SynthConfig::default()
    };
    let clips = generate_synthetic(&cfg).unwrap();
    // Same seed twice: identical. The in-process rerun stands in for the
    // cross-process contract because nothing feeds the split except the seed
    // and the sorted clip ids.
    let a = make_split(&clips, 15, 9, 0.25).unwrap();
    let b = make_split(&clips, 15, 9, 0.25).unwrap();
    assert_eq!(a, b);

    let mut labeled_sets = std::collections::BTreeSet::new();
    for seed in 0..5 {
        labeled_sets.insert(make_split(&clips, 15, seed, 0.25).unwrap().labeled_ids);
    }
    assert_eq!(labeled_sets.len(), 5, "labeled sets collide across seeds");
}
