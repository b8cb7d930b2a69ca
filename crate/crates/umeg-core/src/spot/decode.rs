//! Decoding frame scores into an event sequence: threshold plus strict
//! local-maximum suppression with ties broken toward the earlier frame.

use serde::{Deserialize, Serialize};

use super::{EventSequence, FrameScores};
use crate::data::EventLabel;
use crate::{CoreError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    /// Event probability threshold.
    pub threshold: f64,
    /// Suppression radius in frames: a selected frame must beat every
    /// neighbor within this distance.
    pub suppression_radius: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            suppression_radius: 2,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(CoreError::Config(format!(
                "decode threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        if self.suppression_radius == 0 {
            return Err(CoreError::Config("suppression radius must be >= 1".into()));
        }
        Ok(())
    }
}

/// Selects frames where the event probability reaches the threshold and is a
/// strict local maximum within the suppression radius (ties go to the
/// earlier frame), then assigns each the argmax class.
pub fn decode(scores: &FrameScores, cfg: &DecodeConfig) -> EventSequence {
    let t = scores.frames;
    let w = cfg.suppression_radius;
    let mut events = Vec::new();
    for ti in 0..t {
        let p = scores.event_prob[ti];
        if p < cfg.threshold {
            continue;
        }
        let lo = ti.saturating_sub(w);
        let hi = (ti + w).min(t.saturating_sub(1));
        let mut is_peak = true;
        for other in lo..=hi {
            if other == ti {
                continue;
            }
            let q = scores.event_prob[other];
            if q > p || (q == p && other < ti) {
                is_peak = false;
                break;
            }
        }
        if !is_peak {
            continue;
        }
        let row = &scores.class_logits[ti * scores.classes..(ti + 1) * scores.classes];
        let class_id = row
            .iter()
            .enumerate()
            .fold((0usize, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
                if v > bv {
                    (i, v)
                } else {
                    (bi, bv)
                }
            })
            .0;
        events.push(EventLabel { class_id, frame: ti });
    }
    events
}
