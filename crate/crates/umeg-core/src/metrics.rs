//! Evaluation metrics: edit score over class sequences and mean F1 with
//! temporal tolerance, plus pooled aggregation across an evaluation set.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::spot::EventSequence;

/// Per-class matching outcome of one clip.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MatchResult {
    /// class -> (true positives, false positives, false negatives).
    pub per_class: BTreeMap<usize, (usize, usize, usize)>,
    /// Matched (prediction frame, ground-truth frame) pairs.
    pub matched: Vec<(usize, usize)>,
}

/// Edit score in [0, 100]: `100 * (1 - lev(pred, gt) / max(|pred|, |gt|))`
/// over the class-id strings, clipped below at zero. Both empty scores 100.
pub fn edit_score(pred: &EventSequence, gt: &EventSequence) -> f64 {
    let p: Vec<usize> = pred.iter().map(|e| e.class_id).collect();
    let g: Vec<usize> = gt.iter().map(|e| e.class_id).collect();
    if p.is_empty() && g.is_empty() {
        return 100.0;
    }
    let denom = p.len().max(g.len()) as f64;
    let distance = levenshtein(&p, &g) as f64;
    (100.0 * (1.0 - distance / denom)).max(0.0)
}

/// Unit-cost Levenshtein distance with a rolling row.
fn levenshtein(a: &[usize], b: &[usize]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let substitute = prev[j] + usize::from(ca != cb);
            cur[j + 1] = substitute.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Greedy-in-time tolerance matching for one clip: per class, predictions in
/// ascending frame order claim the earliest unmatched ground-truth event
/// within `delta` frames.
pub fn match_events(pred: &EventSequence, gt: &EventSequence, delta: usize) -> MatchResult {
    let mut result = MatchResult::default();
    let mut classes: Vec<usize> = pred.iter().chain(gt.iter()).map(|e| e.class_id).collect();
    classes.sort();
    classes.dedup();
    for class in classes {
        let p_frames: Vec<usize> = pred
            .iter()
            .filter(|e| e.class_id == class)
            .map(|e| e.frame)
            .collect();
        let g_frames: Vec<usize> = gt
            .iter()
            .filter(|e| e.class_id == class)
            .map(|e| e.frame)
            .collect();
        let mut taken = vec![false; g_frames.len()];
        let mut tp = 0usize;
        for &pf in &p_frames {
            let candidate = g_frames
                .iter()
                .enumerate()
                .find(|&(gi, &gf)| !taken[gi] && pf.abs_diff(gf) <= delta);
            if let Some((gi, &gf)) = candidate {
                taken[gi] = true;
                tp += 1;
                result.matched.push((pf, gf));
            }
        }
        let fp = p_frames.len() - tp;
        let fn_ = g_frames.len() - tp;
        result.per_class.insert(class, (tp, fp, fn_));
    }
    result
}

fn f1_from_counts(tp: usize, fp: usize, fn_: usize) -> f64 {
    if 2 * tp + fp + fn_ == 0 {
        0.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    }
}

/// Per-class F1 and mean F1 at temporal tolerance `delta`. The mean covers
/// classes present in either sequence; a class with ground truth and no
/// matches scores 0.
pub fn f1_at_tolerance(
    pred: &EventSequence,
    gt: &EventSequence,
    delta: usize,
) -> (BTreeMap<usize, f64>, f64) {
    let result = match_events(pred, gt, delta);
    let per_class: BTreeMap<usize, f64> = result
        .per_class
        .iter()
        .map(|(&c, &(tp, fp, fn_))| (c, f1_from_counts(tp, fp, fn_)))
        .collect();
    let mean = if per_class.is_empty() {
        1.0 // Both sequences empty: nothing to miss.
    } else {
        per_class.values().sum::<f64>() / per_class.len() as f64
    };
    (per_class, mean)
}

/// Aggregate report over an evaluation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Mean over classes of F1 computed from pooled counts.
    pub f1_evt: f64,
    /// Mean of per-clip edit scores.
    pub edit: f64,
    /// class -> pooled F1.
    pub per_class_f1: BTreeMap<usize, f64>,
    pub clips: usize,
}

/// Pools per-clip matching counts per class, then means F1 over classes;
/// edit is the mean of per-clip edit scores.
pub fn aggregate(per_clip: &[(MatchResult, f64)]) -> crate::Result<EvalReport> {
    if per_clip.is_empty() {
        return Err(crate::CoreError::Config(
            "aggregate needs a non-empty evaluation set".into(),
        ));
    }
    let mut pooled: BTreeMap<usize, (usize, usize, usize)> = BTreeMap::new();
    for (result, _) in per_clip {
        for (&class, &(tp, fp, fn_)) in &result.per_class {
            let entry = pooled.entry(class).or_insert((0, 0, 0));
            entry.0 += tp;
            entry.1 += fp;
            entry.2 += fn_;
        }
    }
    let per_class_f1: BTreeMap<usize, f64> = pooled
        .iter()
        .map(|(&c, &(tp, fp, fn_))| (c, f1_from_counts(tp, fp, fn_)))
        .collect();
    let f1_evt = if per_class_f1.is_empty() {
        1.0
    } else {
        per_class_f1.values().sum::<f64>() / per_class_f1.len() as f64
    };
    let edit = per_clip.iter().map(|(_, e)| e).sum::<f64>() / per_clip.len() as f64;
    Ok(EvalReport {
        f1_evt,
        edit,
        per_class_f1,
        clips: per_clip.len(),
    })
}

/// Converts a tolerance in seconds to frames at a clip's frame rate.
pub fn seconds_to_frames(delta_seconds: f64, fps: f64) -> usize {
    (delta_seconds * fps).round() as usize
}
