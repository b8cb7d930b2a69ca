//! Clip data model, on-disk dataset format, synthetic rally generation, and
//! k-clip few-shot splits.
//!
//! A [`KeypointClip`] is one annotated rally: per-frame keypoints for every
//! entity (persons, ball, court corners) in a fixed canonical node order,
//! plus an ordered list of event labels. Undetected keypoints are zero-filled
//! and tracked through a per-node detection mask.

mod io;
mod split;
mod synth;

pub use io::{load_clip, load_dataset, save_clip, save_dataset};
pub use split::{make_split, select_clips};
pub use synth::{generate_synthetic, SynthConfig, SYNTH_NUM_CLASSES, SYNTH_SPEED_THRESHOLD};

use serde::{Deserialize, Serialize};

use crate::{CoreError, Result};

/// Which entities a dataset carries and how its canonical node order is laid
/// out: persons first (joints inner), then the ball, then court corners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityLayout {
    pub num_persons: usize,
    pub joints_per_person: usize,
    pub has_ball: bool,
    /// 0 or 4.
    pub num_court_points: usize,
}

impl EntityLayout {
    pub fn new(
        num_persons: usize,
        joints_per_person: usize,
        has_ball: bool,
        num_court_points: usize,
    ) -> Result<Self> {
        let layout = Self {
            num_persons,
            joints_per_person,
            has_ball,
            num_court_points,
        };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_persons == 0 {
            return Err(CoreError::Config("layout needs at least one person".into()));
        }
        if self.joints_per_person == 0 {
            return Err(CoreError::Config(
                "layout needs at least one joint per person".into(),
            ));
        }
        if self.num_court_points != 0 && self.num_court_points != 4 {
            return Err(CoreError::Config(format!(
                "num_court_points must be 0 or 4, got {}",
                self.num_court_points
            )));
        }
        Ok(())
    }

    /// Total node count: `N*K + |ball| + |court|`.
    pub fn node_count(&self) -> usize {
        self.num_persons * self.joints_per_person
            + usize::from(self.has_ball)
            + self.num_court_points
    }

    /// Canonical node index of joint `j` of person `p`.
    pub fn person_joint_index(&self, person: usize, joint: usize) -> usize {
        debug_assert!(person < self.num_persons && joint < self.joints_per_person);
        person * self.joints_per_person + joint
    }

    /// Canonical node index of the ball, if present.
    pub fn ball_index(&self) -> Option<usize> {
        self.has_ball
            .then(|| self.num_persons * self.joints_per_person)
    }

    /// Canonical node index of court corner `i`, if present.
    pub fn court_index(&self, corner: usize) -> Option<usize> {
        (corner < self.num_court_points).then(|| {
            self.num_persons * self.joints_per_person + usize::from(self.has_ball) + corner
        })
    }
}

/// One frame of keypoints in canonical node order. Undetected nodes carry
/// coordinates exactly `(0, 0)` and a cleared mask bit.
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointFrame {
    pub coords: Vec<[f64; 2]>,
    pub detected: Vec<bool>,
}

impl KeypointFrame {
    /// All-detected frame from raw coordinates.
    pub fn new(coords: Vec<[f64; 2]>) -> Self {
        let n = coords.len();
        Self {
            coords,
            detected: vec![true; n],
        }
    }

    /// Marks a node undetected, zero-filling its coordinates.
    pub fn clear_node(&mut self, node: usize) {
        self.coords[node] = [0.0, 0.0];
        self.detected[node] = false;
    }

    fn validate(&self, layout: &EntityLayout, clip: &str, frame_index: usize) -> Result<()> {
        let n = layout.node_count();
        if self.coords.len() != n {
            return Err(CoreError::Validation {
                clip: clip.to_string(),
                message: format!(
                    "frame {frame_index} has {} nodes, layout requires {n}",
                    self.coords.len()
                ),
            });
        }
        if self.detected.len() != n {
            return Err(CoreError::Validation {
                clip: clip.to_string(),
                message: format!(
                    "frame {frame_index} mask has {} bits, layout requires {n}",
                    self.detected.len()
                ),
            });
        }
        for (i, (xy, &det)) in self.coords.iter().zip(&self.detected).enumerate() {
            if det {
                if !xy[0].is_finite() || !xy[1].is_finite() {
                    return Err(CoreError::Validation {
                        clip: clip.to_string(),
                        message: format!("frame {frame_index} node {i} has non-finite coordinates"),
                    });
                }
                if !(0.0..=1.0).contains(&xy[0]) || !(0.0..=1.0).contains(&xy[1]) {
                    return Err(CoreError::Validation {
                        clip: clip.to_string(),
                        message: format!(
                            "frame {frame_index} node {i} outside normalized range: ({}, {})",
                            xy[0], xy[1]
                        ),
                    });
                }
            } else if xy[0] != 0.0 || xy[1] != 0.0 {
                return Err(CoreError::Validation {
                    clip: clip.to_string(),
                    message: format!(
                        "frame {frame_index} node {i} is undetected but not zero-filled"
                    ),
                });
            }
        }
        Ok(())
    }
}

/// One labeled event: class id and the exact frame it occurs at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventLabel {
    pub class_id: usize,
    pub frame: usize,
}

/// One annotated clip (a rally): frames, sorted labels, and the entity layout
/// shared by every frame.
#[derive(Debug, Clone, PartialEq)]
pub struct KeypointClip {
    pub clip_id: String,
    pub fps: f64,
    pub layout: EntityLayout,
    pub frames: Vec<KeypointFrame>,
    /// Strictly sorted by frame; at most one event per frame.
    pub labels: Vec<EventLabel>,
}

impl KeypointClip {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Sorts labels ascending by frame and checks every clip invariant.
    pub fn normalize_and_validate(&mut self) -> Result<()> {
        self.layout.validate()?;
        if self.frames.is_empty() {
            return Err(CoreError::Validation {
                clip: self.clip_id.clone(),
                message: "clip has no frames".into(),
            });
        }
        if !self.fps.is_finite() || self.fps <= 0.0 {
            return Err(CoreError::Validation {
                clip: self.clip_id.clone(),
                message: format!("invalid fps {}", self.fps),
            });
        }
        for (t, frame) in self.frames.iter().enumerate() {
            frame.validate(&self.layout, &self.clip_id, t)?;
        }
        self.labels.sort_by_key(|l| l.frame);
        for pair in self.labels.windows(2) {
            if pair[0].frame == pair[1].frame {
                return Err(CoreError::Validation {
                    clip: self.clip_id.clone(),
                    message: format!("two events share frame {}", pair[0].frame),
                });
            }
        }
        if let Some(last) = self.labels.last() {
            if last.frame >= self.frames.len() {
                return Err(CoreError::Validation {
                    clip: self.clip_id.clone(),
                    message: format!(
                        "label at frame {} outside clip of length {}",
                        last.frame,
                        self.frames.len()
                    ),
                });
            }
        }
        Ok(())
    }
}

/// Smallest class count covering every label in `clips`.
pub fn num_classes(clips: &[KeypointClip]) -> usize {
    clips
        .iter()
        .flat_map(|c| c.labels.iter())
        .map(|l| l.class_id + 1)
        .max()
        .unwrap_or(0)
}

/// A k-clip few-shot split: `k` labeled clips, an unlabeled pool, and an
/// evaluation set, all pairwise disjoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FewShotSplit {
    pub labeled_ids: Vec<String>,
    pub unlabeled_ids: Vec<String>,
    pub eval_ids: Vec<String>,
    pub seed: u64,
}

impl FewShotSplit {
    pub fn k(&self) -> usize {
        self.labeled_ids.len()
    }
}
