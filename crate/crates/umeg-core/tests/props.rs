//! Property tests over the shift machinery, decoding, and metric bounds.

use proptest::prelude::*;

use umeg_core::data::EventLabel;
use umeg_core::metrics::{edit_score, f1_at_tolerance};
use umeg_core::net::{channel_split, shift_streams, split_sizes, Feat};
use umeg_core::spot::{decode, DecodeConfig, FrameScores};

fn feat_strategy() -> impl Strategy<Value = (Feat, f64)> {
    (2usize..6, 1usize..4, 4usize..12, 0.05f64..0.5)
        .prop_flat_map(|(t, v, c, alpha)| {
            (
                proptest::collection::vec(-1.0f64..1.0, t * v * c),
                Just((t, v, c, alpha)),
            )
        })
        .prop_map(|(data, (t, v, c, alpha))| {
            (
                Feat {
                    frames: t,
                    nodes: v,
                    channels: c,
                    data,
                },
                alpha,
            )
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_plus_concat_reconstructs_every_frame((feat, alpha) in feat_strategy()) {
        let (d_static, d_shift) = split_sizes(feat.channels, alpha);
        prop_assert_eq!(d_static + 2 * d_shift, feat.channels);
        for t in 0..feat.frames {
            let frame = feat.frame(t);
            let (s, f, b) = channel_split(frame, feat.channels, alpha);
            let mut rebuilt = Vec::with_capacity(frame.len());
            for v in 0..feat.nodes {
                rebuilt.extend_from_slice(&s[v * d_static..(v + 1) * d_static]);
                rebuilt.extend_from_slice(&f[v * d_shift..(v + 1) * d_shift]);
                rebuilt.extend_from_slice(&b[v * d_shift..(v + 1) * d_shift]);
            }
            prop_assert_eq!(rebuilt.as_slice(), frame);
        }
    }

    #[test]
    fn shifted_channels_come_from_the_right_frames(
        (feat, alpha) in feat_strategy(),
        delta in 1usize..5,
    ) {
        let (d_static, d_shift) = split_sizes(feat.channels, alpha);
        let shifted = shift_streams(&feat, alpha, delta);
        for t in 0..feat.frames {
            for v in 0..feat.nodes {
                for c in 0..d_static {
                    prop_assert_eq!(shifted.at(t, v, c), feat.at(t, v, c));
                }
                for c in d_static..d_static + d_shift {
                    let expected = if t >= delta { feat.at(t - delta, v, c) } else { 0.0 };
                    prop_assert_eq!(shifted.at(t, v, c), expected);
                }
                for c in d_static + d_shift..feat.channels {
                    let expected = if t + delta < feat.frames {
                        feat.at(t + delta, v, c)
                    } else {
                        0.0
                    };
                    prop_assert_eq!(shifted.at(t, v, c), expected);
                }
            }
        }
    }

    #[test]
    fn decoded_events_are_sorted_thresholded_and_spaced(
        probs in proptest::collection::vec(0.0f64..1.0, 1..80),
        threshold in 0.1f64..0.9,
        radius in 1usize..4,
    ) {
        let scores = FrameScores {
            frames: probs.len(),
            classes: 3,
            event_prob: probs.clone(),
            class_logits: vec![0.0; probs.len() * 3],
        };
        let cfg = DecodeConfig { threshold, suppression_radius: radius };
        let events = decode(&scores, &cfg);
        for e in &events {
            prop_assert!(probs[e.frame] >= threshold);
        }
        for pair in events.windows(2) {
            prop_assert!(pair[0].frame < pair[1].frame);
            prop_assert!(pair[1].frame - pair[0].frame > radius);
        }
    }

    #[test]
    fn metric_outputs_stay_bounded(
        pred_raw in proptest::collection::vec((0usize..5, 0usize..50), 0..12),
        gt_raw in proptest::collection::vec((0usize..5, 0usize..50), 0..12),
        delta in 0usize..5,
    ) {
        let to_seq = |raw: &[(usize, usize)]| {
            let mut events: Vec<EventLabel> = raw
                .iter()
                .map(|&(class_id, frame)| EventLabel { class_id, frame })
                .collect();
            events.sort_by_key(|e| e.frame);
            events
        };
        let pred = to_seq(&pred_raw);
        let gt = to_seq(&gt_raw);
        let edit = edit_score(&pred, &gt);
        prop_assert!((0.0..=100.0).contains(&edit));
        let (_, f1) = f1_at_tolerance(&pred, &gt, delta);
        prop_assert!((0.0..=1.0).contains(&f1));
        // Perfect agreement scores perfectly.
        prop_assert_eq!(edit_score(&gt, &gt), 100.0);
        let (_, perfect) = f1_at_tolerance(&gt, &gt, delta);
        prop_assert_eq!(perfect, 1.0);
    }
}
