//! Sliding-window extraction with temporal dilation.
//!
//! A window of `seq_len` positions starting at frame `start` samples frames
//! `start + i * stride`. Positions past the clip end are zero-padded and
//! masked out of the loss. Full-clip inference tiles every stride phase so
//! each original frame is predicted exactly once.

use crate::data::EventLabel;
use crate::graph::GraphSequence;

/// Number of raw frames a window spans.
pub fn window_span(seq_len: usize, stride: usize) -> usize {
    (seq_len - 1) * stride + 1
}

/// Extracts a dilated window from a clip sequence. Returns the windowed
/// sequence and the validity mask for padded positions.
pub fn window_sequence(
    seq: &GraphSequence,
    start: usize,
    seq_len: usize,
    stride: usize,
) -> (GraphSequence, Vec<bool>) {
    let v = seq.topology.node_count;
    let mut coords = vec![0.0; seq_len * v * 2];
    let mut valid = vec![false; seq_len];
    for i in 0..seq_len {
        let frame = start + i * stride;
        if frame < seq.frames {
            valid[i] = true;
            let src = frame * v * 2;
            let dst = i * v * 2;
            coords[dst..dst + v * 2].copy_from_slice(&seq.coords[src..src + v * 2]);
        }
    }
    (
        GraphSequence {
            coords,
            frames: seq_len,
            topology: seq.topology.clone(),
        },
        valid,
    )
}

/// Maps clip-frame labels into window positions. A label at frame `f` lands
/// on the nearest sampled position; labels outside the window span are
/// dropped, as are duplicates on one position.
pub fn window_labels(
    labels: &[EventLabel],
    start: usize,
    seq_len: usize,
    stride: usize,
) -> Vec<EventLabel> {
    let span = window_span(seq_len, stride);
    let mut out: Vec<EventLabel> = Vec::new();
    for l in labels {
        if l.frame < start || l.frame >= start + span {
            continue;
        }
        let rel = l.frame - start;
        let pos = ((rel + stride / 2) / stride).min(seq_len - 1);
        if out.last().is_some_and(|prev| prev.frame == pos) {
            continue;
        }
        out.push(EventLabel {
            class_id: l.class_id,
            frame: pos,
        });
    }
    out
}

/// Deterministic window starts covering a clip: for each phase `0..stride`,
/// spans tile end to end, so every frame belongs to exactly one window
/// position across the returned starts.
pub fn tile_starts(clip_frames: usize, seq_len: usize, stride: usize) -> Vec<usize> {
    let span = window_span(seq_len, stride);
    let mut starts = Vec::new();
    for phase in 0..stride.min(clip_frames) {
        let mut s = phase;
        while s < clip_frames {
            starts.push(s);
            s += span.max(1) + (stride - 1);
        }
    }
    starts
}

/// Overlapped inference tiling: windows advance by half their length and
/// each one owns only its central positions, so every frame is predicted by
/// the window that gives it the most temporal context. Returns
/// `(start, owned position range)` pairs; ownership ranges partition each
/// phase's frames.
pub fn inference_windows(
    clip_frames: usize,
    seq_len: usize,
    stride: usize,
) -> Vec<(usize, std::ops::Range<usize>)> {
    let hop = (seq_len / 2).max(1);
    let lo = seq_len / 4;
    let hi = lo + hop;
    let mut out = Vec::new();
    for phase in 0..stride.min(clip_frames) {
        // Number of windows so that the last owned block reaches the end.
        let mut starts = vec![phase];
        loop {
            let last = *starts.last().expect("non-empty");
            // Frames of this phase covered so far through the last window's
            // upper ownership bound (the final window owns through its end).
            let covered_through = last + (seq_len - 1) * stride;
            if covered_through >= clip_frames.saturating_sub(1) {
                break;
            }
            starts.push(last + hop * stride);
        }
        let n = starts.len();
        for (j, &s) in starts.iter().enumerate() {
            let own_lo = if j == 0 { 0 } else { lo };
            let own_hi = if j + 1 == n { seq_len } else { hi };
            out.push((s, own_lo..own_hi));
        }
    }
    out
}
