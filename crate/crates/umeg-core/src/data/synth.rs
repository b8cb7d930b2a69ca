//! Synthetic rally generation with a deterministic event oracle.
//!
//! Each clip simulates a rally between two persons: the ball travels
//! ballistically between them, and at every contact the receiving player's
//! nearest wrist coincides exactly with the ball while the ball reverses
//! horizontal direction. The event class at a contact is a deterministic
//! function of (receiving player, wrist above/below that player's hip, ball
//! speed bucket), so a rule that reads only keypoints can recover the labels
//! perfectly on noiseless data.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EntityLayout, EventLabel, KeypointClip, KeypointFrame};
use crate::graph::coco;
use crate::{CoreError, Result};

/// Classes emitted by the generator: player (2) x above/below hip (2) x
/// speed bucket (2).
pub const SYNTH_NUM_CLASSES: usize = 8;

/// Horizontal per-frame ball speed separating the slow and fast buckets,
/// in normalized image units. Sits at the empirical median of contact
/// speeds under the default geometry, so the two buckets stay balanced.
/// Shared by the generator and any keypoint-only decoder so the class stays
/// derivable from stored coordinates.
pub const SYNTH_SPEED_THRESHOLD: f64 = 0.0096;

/// Configuration for [`generate_synthetic`].
#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub num_clips: usize,
    /// Frames per clip (`T_clip`).
    pub frames_per_clip: usize,
    pub layout: EntityLayout,
    /// Minimum frames between consecutive events.
    pub gap_min: usize,
    /// Maximum frames between consecutive events.
    pub gap_max: usize,
    /// Standard deviation of coordinate noise, in normalized units.
    pub noise_sigma: f64,
    /// Per-node, per-frame probability of a missing detection.
    pub miss_prob: f64,
    pub fps: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_clips: 100,
            frames_per_clip: 300,
            layout: EntityLayout {
                num_persons: 2,
                joints_per_person: coco::NUM_JOINTS,
                has_ball: true,
                num_court_points: 4,
            },
            gap_min: 20,
            gap_max: 40,
            noise_sigma: 0.0,
            miss_prob: 0.0,
            fps: 30.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        self.layout.validate()?;
        if self.num_clips == 0 {
            return Err(CoreError::Config("num_clips must be positive".into()));
        }
        if self.layout.num_persons < 2 || !self.layout.has_ball {
            return Err(CoreError::Config(
                "synthetic rallies need at least two persons and a ball".into(),
            ));
        }
        if self.layout.joints_per_person != coco::NUM_JOINTS {
            return Err(CoreError::Config(format!(
                "synthetic skeletons are COCO-17; got {} joints per person",
                self.layout.joints_per_person
            )));
        }
        if self.gap_min < 4 || self.gap_min > self.gap_max {
            return Err(CoreError::Config(format!(
                "event gaps must satisfy 4 <= gap_min <= gap_max, got [{}, {}]",
                self.gap_min, self.gap_max
            )));
        }
        if self.gap_max + 2 > self.frames_per_clip {
            return Err(CoreError::Config(format!(
                "event rate incompatible with clip length: gap_max {} does not fit in {} frames",
                self.gap_max, self.frames_per_clip
            )));
        }
        if self.noise_sigma < 0.0 || !self.noise_sigma.is_finite() {
            return Err(CoreError::Config("noise_sigma must be finite and >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.miss_prob) {
            return Err(CoreError::Config("miss_prob must be in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Neutral standing pose, per joint, as (dx, dy) offsets from the hip center
/// in body-scale units. Image y grows downward, so heads are negative.
const POSE_OFFSETS: [[f64; 2]; coco::NUM_JOINTS] = [
    [0.00, -1.05],  // nose
    [0.05, -1.12],  // left eye
    [-0.05, -1.12], // right eye
    [0.11, -1.08],  // left ear
    [-0.11, -1.08], // right ear
    [0.26, -0.72],  // left shoulder
    [-0.26, -0.72], // right shoulder
    [0.36, -0.42],  // left elbow
    [-0.36, -0.42], // right elbow
    [0.40, -0.14],  // left wrist
    [-0.40, -0.14], // right wrist
    [0.15, 0.00],   // left hip
    [-0.15, 0.00],  // right hip
    [0.16, 0.45],   // left knee
    [-0.16, 0.45],  // right knee
    [0.17, 0.90],   // left ankle
    [-0.17, 0.90],  // right ankle
];

fn joint_sway_amp(joint: usize) -> f64 {
    match joint {
        coco::LEFT_ELBOW | coco::RIGHT_ELBOW | coco::LEFT_WRIST | coco::RIGHT_WRIST => 0.012,
        0..=4 => 0.005,
        _ => 0.004,
    }
}

struct Person {
    center_x: f64,
    hip_y: f64,
    scale: f64,
    omega: [f64; 2],
    /// Per joint, per axis phase.
    phases: Vec<[f64; 2]>,
}

impl Person {
    /// Swayed joint position before any contact reach is applied.
    fn natural_joint(&self, joint: usize, t: usize) -> [f64; 2] {
        let amp = joint_sway_amp(joint);
        let tf = t as f64;
        [
            self.center_x
                + self.scale * POSE_OFFSETS[joint][0]
                + amp * (self.omega[0] * tf + self.phases[joint][0]).sin(),
            self.hip_y
                + self.scale * POSE_OFFSETS[joint][1]
                + amp * (self.omega[1] * tf + self.phases[joint][1]).sin(),
        ]
    }
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.random();
    let u2: f64 = rng.random();
    (-2.0 * (1.0 - u1).max(1e-300).ln()).sqrt() * (TAU * u2).cos()
}

/// Generates `config.num_clips` rally clips. Bit-identical for equal configs.
pub fn generate_synthetic(config: &SynthConfig) -> Result<Vec<KeypointClip>> {
    config.validate()?;
    let width = config.num_clips.to_string().len().max(3);
    (0..config.num_clips)
        .map(|i| {
            let clip_seed = config
                .seed
                .wrapping_add((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let clip_id = format!("clip_{i:0width$}");
            generate_clip(config, clip_id, clip_seed)
        })
        .collect()
}

fn generate_clip(config: &SynthConfig, clip_id: String, seed: u64) -> Result<KeypointClip> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = config.layout;
    let t_clip = config.frames_per_clip;
    let node_count = layout.node_count();

    // Court corners: jittered rectangle, order TL, TR, BR, BL.
    let court: Vec<[f64; 2]> = [[0.15, 0.25], [0.85, 0.25], [0.85, 0.92], [0.15, 0.92]]
        .iter()
        .take(layout.num_court_points)
        .map(|base| {
            [
                base[0] + rng.random_range(-0.02..0.02),
                base[1] + rng.random_range(-0.02..0.02),
            ]
        })
        .collect();

    let mut persons = Vec::with_capacity(layout.num_persons);
    for p in 0..layout.num_persons {
        let center_x = match p {
            0 => 0.28 + rng.random_range(-0.03..0.03),
            1 => 0.72 + rng.random_range(-0.03..0.03),
            // Spectators beyond the two rally players idle near the middle.
            _ => 0.50 + 0.08 * (p as f64 - 1.0) + rng.random_range(-0.02..0.02),
        };
        let hip_y = 0.58 + rng.random_range(-0.04..0.04);
        let scale = 0.16 + rng.random_range(-0.02..0.02);
        let omega = [rng.random_range(0.10..0.28), rng.random_range(0.10..0.28)];
        let phases = (0..coco::NUM_JOINTS)
            .map(|_| [rng.random_range(0.0..TAU), rng.random_range(0.0..TAU)])
            .collect();
        persons.push(Person {
            center_x,
            hip_y,
            scale,
            omega,
            phases,
        });
    }

    // Contact schedule: alternating receivers, gaps uniform in [gap_min, gap_max].
    let first_receiver: usize = rng.random_range(0..2);
    let mut contact_frames = Vec::new();
    let mut t = rng.random_range(config.gap_min..=config.gap_max);
    while t <= t_clip - 2 {
        contact_frames.push(t);
        t += rng.random_range(config.gap_min..=config.gap_max);
    }

    struct Contact {
        frame: usize,
        receiver: usize,
        point: [f64; 2],
    }
    let contacts: Vec<Contact> = contact_frames
        .iter()
        .enumerate()
        .map(|(i, &frame)| {
            let receiver = (first_receiver + i) % 2;
            let person = &persons[receiver];
            let toward = if persons[1 - receiver].center_x > person.center_x {
                1.0
            } else {
                -1.0
            };
            let reach: f64 = rng.random_range(0.30..0.55);
            let high: bool = rng.random();
            let dy: f64 = if high {
                -rng.random_range(0.55..1.00)
            } else {
                rng.random_range(0.18..0.40)
            };
            Contact {
                frame,
                receiver,
                point: [
                    person.center_x + toward * person.scale * reach,
                    person.hip_y + person.scale * dy,
                ],
            }
        })
        .collect();

    // Ball track through the contact anchors, with an upward arc per segment.
    let serve = [
        0.5 + rng.random_range(-0.05..0.05),
        0.42 + rng.random_range(-0.05..0.05),
    ];
    let mut anchors: Vec<(usize, [f64; 2])> = Vec::with_capacity(contacts.len() + 2);
    anchors.push((0, serve));
    for c in &contacts {
        anchors.push((c.frame, c.point));
    }
    let last = &contacts[contacts.len() - 1];
    let other = &persons[1 - last.receiver];
    anchors.push((
        last.frame + config.gap_max.max(t_clip - last.frame),
        [other.center_x, other.hip_y - 0.7 * other.scale],
    ));
    let arcs: Vec<f64> = (1..anchors.len())
        .map(|_| rng.random_range(0.08..0.20))
        .collect();

    let mut ball_track = vec![[0.0_f64; 2]; t_clip];
    ball_track[0] = serve;
    let mut seg = 0;
    for (t, pos) in ball_track.iter_mut().enumerate().skip(1) {
        while t > anchors[seg + 1].0 {
            seg += 1;
        }
        let (t0, p0) = anchors[seg];
        let (t1, p1) = anchors[seg + 1];
        let tau = (t - t0) as f64 / (t1 - t0) as f64;
        *pos = [
            p0[0] + (p1[0] - p0[0]) * tau,
            p0[1] + (p1[1] - p0[1]) * tau - arcs[seg] * 4.0 * tau * (1.0 - tau),
        ];
    }

    // Clean frames: sway everywhere, reach toward each contact, exact
    // wrist/ball coincidence at the contact frame itself.
    let mut frames: Vec<KeypointFrame> = (0..t_clip)
        .map(|t| {
            let mut coords = vec![[0.0_f64; 2]; node_count];
            for (p, person) in persons.iter().enumerate() {
                for j in 0..coco::NUM_JOINTS {
                    coords[layout.person_joint_index(p, j)] = person.natural_joint(j, t);
                }
            }
            if let Some(b) = layout.ball_index() {
                coords[b] = ball_track[t];
            }
            for (i, corner) in court.iter().enumerate() {
                coords[layout.court_index(i).expect("court corner")] = *corner;
            }
            KeypointFrame::new(coords)
        })
        .collect();

    for c in &contacts {
        let person = &persons[c.receiver];
        let left = person.natural_joint(coco::LEFT_WRIST, c.frame);
        let right = person.natural_joint(coco::RIGHT_WRIST, c.frame);
        let d2 = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
        let wrist = if d2(left, c.point) <= d2(right, c.point) {
            coco::LEFT_WRIST
        } else {
            coco::RIGHT_WRIST
        };
        let node = layout.person_joint_index(c.receiver, wrist);
        for dt in -3i64..=3 {
            let Some(t) = c.frame.checked_add_signed(dt as isize) else {
                continue;
            };
            if t >= t_clip {
                continue;
            }
            if dt == 0 {
                frames[t].coords[node] = ball_track[c.frame];
            } else {
                let natural = persons[c.receiver].natural_joint(wrist, t);
                let w = 0.75 * (1.0 - dt.abs() as f64 / 4.0).powi(2);
                frames[t].coords[node] = [
                    natural[0] + (c.point[0] - natural[0]) * w,
                    natural[1] + (c.point[1] - natural[1]) * w,
                ];
            }
        }
    }

    // Labels from the clean construction: class is a deterministic function
    // of (receiver, wrist above/below hip, incoming speed bucket), all
    // measured on the same values that get stored.
    let labels: Vec<EventLabel> = contacts
        .iter()
        .map(|c| {
            let vx = ball_track[c.frame][0] - ball_track[c.frame - 1][0];
            let fast = vx.abs() > SYNTH_SPEED_THRESHOLD;
            let hip_left = frames[c.frame].coords[layout.person_joint_index(c.receiver, coco::LEFT_HIP)];
            let hip_right =
                frames[c.frame].coords[layout.person_joint_index(c.receiver, coco::RIGHT_HIP)];
            let hip_y = 0.5 * (hip_left[1] + hip_right[1]);
            let above = c.point[1] < hip_y;
            EventLabel {
                class_id: c.receiver * 4 + usize::from(above) * 2 + usize::from(fast),
                frame: c.frame,
            }
        })
        .collect();

    // Observation noise and missing detections, then clamp to image bounds.
    for frame in &mut frames {
        for xy in &mut frame.coords {
            if config.noise_sigma > 0.0 {
                xy[0] += config.noise_sigma * gauss(&mut rng);
                xy[1] += config.noise_sigma * gauss(&mut rng);
            }
            xy[0] = xy[0].clamp(0.0, 1.0);
            xy[1] = xy[1].clamp(0.0, 1.0);
        }
        if config.miss_prob > 0.0 {
            for node in 0..node_count {
                if rng.random::<f64>() < config.miss_prob {
                    frame.clear_node(node);
                }
            }
        }
    }

    let mut clip = KeypointClip {
        clip_id,
        fps: config.fps,
        layout,
        frames,
        labels,
    };
    clip.normalize_and_validate()?;
    Ok(clip)
}
