//! Foreground-weighted spotting loss.
//!
//! Localization: binary cross-entropy on the per-frame event probability with
//! the foreground weight applied to labeled frames, mean-reduced over all
//! valid frames. Classification: cross-entropy on the class logits evaluated
//! only at labeled frames, mean-reduced over those frames. The two terms are
//! summed 1:1.

use super::{FrameScores, TrainConfig};
use crate::data::EventLabel;

/// Scalar spotting loss over a full window (no padding mask).
pub fn spotting_loss(scores: &FrameScores, labels: &[EventLabel], cfg: &TrainConfig) -> f64 {
    let valid = vec![true; scores.frames];
    loss_and_grads(scores, labels, cfg.foreground_weight, &valid, 1.0).loss
}

pub struct LossGrads {
    pub loss: f64,
    /// Gradient with respect to the localizer logit, per frame.
    pub grad_loc_logit: Vec<f64>,
    /// Gradient with respect to the class logits, row-major (frame, class).
    pub grad_cls_logits: Vec<f64>,
}

/// Loss plus logit gradients. `valid` masks padded window positions out of
/// both terms; `grad_scale` pre-scales the gradients (batch averaging).
pub fn loss_and_grads(
    scores: &FrameScores,
    labels: &[EventLabel],
    foreground_weight: f64,
    valid: &[bool],
    grad_scale: f64,
) -> LossGrads {
    let t = scores.frames;
    let c = scores.classes;
    debug_assert_eq!(valid.len(), t);
    let n_valid = valid.iter().filter(|&&v| v).count().max(1) as f64;

    let mut label_class = vec![usize::MAX; t];
    for l in labels {
        debug_assert!(l.frame < t, "label outside window");
        if valid[l.frame] {
            label_class[l.frame] = l.class_id;
        }
    }

    // Localization: weighted BCE from probabilities, computed via logits for
    // numerical stability: z = logit(p).
    let mut loc_loss = 0.0;
    let mut grad_loc_logit = vec![0.0; t];
    for ti in 0..t {
        if !valid[ti] {
            continue;
        }
        let labeled = label_class[ti] != usize::MAX;
        let y = if labeled { 1.0 } else { 0.0 };
        let w = if labeled { foreground_weight } else { 1.0 };
        let p = scores.event_prob[ti].clamp(1e-12, 1.0 - 1e-12);
        loc_loss -= w * (y * p.ln() + (1.0 - y) * (1.0 - p).ln());
        grad_loc_logit[ti] = grad_scale * w * (p - y) / n_valid;
    }
    loc_loss /= n_valid;

    // Classification at labeled frames only.
    let n_labeled = label_class
        .iter()
        .zip(valid)
        .filter(|(&cls, &v)| v && cls != usize::MAX)
        .count();
    let mut cls_loss = 0.0;
    let mut grad_cls_logits = vec![0.0; t * c];
    if n_labeled > 0 {
        let inv_n = 1.0 / n_labeled as f64;
        for ti in 0..t {
            let target = label_class[ti];
            if target == usize::MAX || !valid[ti] {
                continue;
            }
            let row = &scores.class_logits[ti * c..(ti + 1) * c];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let sum_exp: f64 = row.iter().map(|&l| (l - max).exp()).sum();
            let lse = max + sum_exp.ln();
            cls_loss += (lse - row[target.min(c - 1)]) * inv_n;
            let g_row = &mut grad_cls_logits[ti * c..(ti + 1) * c];
            for (k, (g, &l)) in g_row.iter_mut().zip(row).enumerate() {
                let softmax = (l - lse).exp();
                *g = grad_scale * inv_n * (softmax - if k == target { 1.0 } else { 0.0 });
            }
        }
    }

    LossGrads {
        loss: loc_loss + cls_loss,
        grad_loc_logit,
        grad_cls_logits,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_scores(t: usize, c: usize, p: f64) -> FrameScores {
        FrameScores {
            frames: t,
            classes: c,
            event_prob: vec![p; t],
            class_logits: vec![0.0; t * c],
        }
    }

    fn label(class_id: usize, frame: usize) -> EventLabel {
        EventLabel { class_id, frame }
    }

    #[test]
    fn closed_form_uniform_half_probability() {
        // p = 0.5 everywhere, one label in T = 96 at weight 5:
        // localization = (5 + 95) * ln 2 / 96. Classification with uniform
        // logits over C classes adds ln C.
        let c = 8;
        let scores = uniform_scores(96, c, 0.5);
        let cfg = TrainConfig::default();
        let loss = spotting_loss(&scores, &[label(3, 40)], &cfg);
        let expected = 100.0 * std::f64::consts::LN_2 / 96.0 + (c as f64).ln();
        assert!((loss - expected).abs() < 1e-12, "{loss} vs {expected}");
    }

    #[test]
    fn weight_one_reduces_to_unweighted_bce() {
        let scores = uniform_scores(10, 4, 0.3);
        let mut cfg = TrainConfig {
            foreground_weight: 1.0,
            ..TrainConfig::default()
        };
        let weighted = spotting_loss(&scores, &[label(0, 2)], &cfg);
        cfg.foreground_weight = 1.0;
        // Scalar oracle: plain BCE mean plus uniform CE at the single label.
        let p: f64 = 0.3;
        let bce_pos = -p.ln();
        let bce_neg = -(1.0 - p).ln();
        let oracle = (bce_pos + 9.0 * bce_neg) / 10.0 + 4.0_f64.ln();
        assert!((weighted - oracle).abs() < 1e-12);
    }

    #[test]
    fn perfect_scores_drive_loss_to_zero() {
        let t = 12;
        let c = 3;
        let mut scores = uniform_scores(t, c, 1e-9);
        scores.event_prob[5] = 1.0 - 1e-9;
        for l in scores.class_logits[5 * c..6 * c].iter_mut() {
            *l = -60.0;
        }
        scores.class_logits[5 * c + 2] = 60.0;
        let cfg = TrainConfig::default();
        let loss = spotting_loss(&scores, &[label(2, 5)], &cfg);
        assert!(loss < 1e-6, "loss = {loss}");
    }

    #[test]
    fn empty_labels_drop_classification_term() {
        let scores = uniform_scores(8, 5, 0.2);
        let cfg = TrainConfig::default();
        let loss = spotting_loss(&scores, &[], &cfg);
        let bce = -(0.8_f64).ln();
        assert!((loss - bce).abs() < 1e-12);
    }

    #[test]
    fn loss_is_non_negative() {
        let scores = uniform_scores(6, 2, 0.9);
        let cfg = TrainConfig::default();
        assert!(spotting_loss(&scores, &[label(1, 0)], &cfg) >= 0.0);
        assert!(spotting_loss(&scores, &[], &cfg) >= 0.0);
    }

    #[test]
    fn masked_positions_are_excluded() {
        let scores = uniform_scores(4, 2, 0.5);
        let valid = vec![true, true, false, false];
        let out = loss_and_grads(&scores, &[label(0, 1)], 5.0, &valid, 1.0);
        // Two valid frames: one labeled (w 5), one background.
        let expected = (5.0 + 1.0) * std::f64::consts::LN_2 / 2.0 + 2.0_f64.ln();
        assert!((out.loss - expected).abs() < 1e-12);
        assert_eq!(out.grad_loc_logit[2], 0.0);
        assert_eq!(out.grad_loc_logit[3], 0.0);
    }

    #[test]
    fn logit_gradients_match_finite_differences() {
        // Differentiate through sigmoid/softmax numerically on a tiny case.
        let t = 5;
        let c = 3;
        let labels = [label(1, 1), label(0, 3)];
        let valid = vec![true; t];
        let base_logits: Vec<f64> = (0..t * c).map(|i| (i as f64 * 0.37).sin()).collect();
        let base_loc: Vec<f64> = (0..t).map(|i| (i as f64 * 0.71).cos()).collect();
        let eval = |loc: &[f64], cls: &[f64]| {
            let scores = FrameScores {
                frames: t,
                classes: c,
                event_prob: loc.iter().map(|&z| super::super::head::sigmoid(z)).collect(),
                class_logits: cls.to_vec(),
            };
            loss_and_grads(&scores, &labels, 5.0, &valid, 1.0)
        };
        let analytic = eval(&base_loc, &base_logits);
        let h = 1e-6;
        for i in 0..t {
            let mut plus = base_loc.clone();
            plus[i] += h;
            let mut minus = base_loc.clone();
            minus[i] -= h;
            let numeric = (eval(&plus, &base_logits).loss - eval(&minus, &base_logits).loss)
                / (2.0 * h);
            assert!(
                (numeric - analytic.grad_loc_logit[i]).abs() < 1e-6,
                "loc grad {i}: {numeric} vs {}",
                analytic.grad_loc_logit[i]
            );
        }
        for i in 0..t * c {
            let mut plus = base_logits.clone();
            plus[i] += h;
            let mut minus = base_logits.clone();
            minus[i] -= h;
            let numeric =
                (eval(&base_loc, &plus).loss - eval(&base_loc, &minus).loss) / (2.0 * h);
            assert!(
                (numeric - analytic.grad_cls_logits[i]).abs() < 1e-6,
                "cls grad {i}: {numeric} vs {}",
                analytic.grad_cls_logits[i]
            );
        }
    }
}
