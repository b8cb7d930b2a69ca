//! Line-delimited on-disk dataset format.
//!
//! One file per clip (`<clip_id>.jsonl`):
//! - line 1: header record `{clip_id, t_clip, num_persons, joints_per_person,
//!   has_ball, num_court_points, fps}`
//! - lines 2..=T+1: frame records `{frame_index, coords, mask}` with the flat
//!   coordinate list in canonical node order and the detection mask as a
//!   `0`/`1` bit string
//! - final line: label record `{labels: [[class_id, frame], ...]}`
//!
//! Serialization is canonical (fixed field order, shortest-round-trip floats),
//! so `save` after `load` reproduces files byte for byte.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EntityLayout, EventLabel, KeypointClip, KeypointFrame};
use crate::{CoreError, Result};

#[derive(Serialize, Deserialize)]
struct HeaderRecord {
    clip_id: String,
    t_clip: usize,
    num_persons: usize,
    joints_per_person: usize,
    has_ball: bool,
    num_court_points: usize,
    fps: f64,
}

#[derive(Serialize, Deserialize)]
struct FrameRecord {
    frame_index: usize,
    coords: Vec<f64>,
    mask: String,
}

#[derive(Serialize, Deserialize)]
struct LabelRecord {
    labels: Vec<(usize, usize)>,
}

/// Loads every `*.jsonl` clip in `path`, sorted by file name.
pub fn load_dataset(path: &Path) -> Result<Vec<KeypointClip>> {
    let mut files: Vec<_> = fs::read_dir(path)?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CoreError::Config(format!(
            "no .jsonl clip files under {}",
            path.display()
        )));
    }
    files.iter().map(|f| load_clip(f)).collect()
}

/// Parses and validates a single clip file.
pub fn load_clip(file: &Path) -> Result<KeypointClip> {
    let clip_name = file
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| file.display().to_string());
    let parse_err = |line: usize, message: String| CoreError::Parse {
        clip: clip_name.clone(),
        line,
        message,
    };

    let reader = BufReader::new(fs::File::open(file)?);
    let mut lines = reader.lines().enumerate();

    let (_, header_line) = lines
        .next()
        .ok_or_else(|| parse_err(1, "empty clip file".into()))?;
    let header: HeaderRecord = serde_json::from_str(&header_line?)
        .map_err(|e| parse_err(1, format!("bad header record: {e}")))?;
    let layout = EntityLayout::new(
        header.num_persons,
        header.joints_per_person,
        header.has_ball,
        header.num_court_points,
    )?;
    let node_count = layout.node_count();

    let mut frames = Vec::with_capacity(header.t_clip);
    for t in 0..header.t_clip {
        let line_no = t + 2;
        let (_, line) = lines
            .next()
            .ok_or_else(|| parse_err(line_no, format!("missing frame record {t}")))?;
        let record: FrameRecord = serde_json::from_str(&line?)
            .map_err(|e| parse_err(line_no, format!("bad frame record: {e}")))?;
        if record.frame_index != t {
            return Err(parse_err(
                line_no,
                format!("expected frame_index {t}, found {}", record.frame_index),
            ));
        }
        if record.coords.len() != 2 * node_count {
            return Err(CoreError::Validation {
                clip: clip_name.clone(),
                message: format!(
                    "frame {t} has {} coordinates, layout requires {}",
                    record.coords.len(),
                    2 * node_count
                ),
            });
        }
        if record.mask.len() != node_count {
            return Err(CoreError::Validation {
                clip: clip_name.clone(),
                message: format!(
                    "frame {t} mask has {} bits, layout requires {node_count}",
                    record.mask.len()
                ),
            });
        }
        let coords = record
            .coords
            .chunks_exact(2)
            .map(|c| [c[0], c[1]])
            .collect();
        let detected = record
            .mask
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(parse_err(line_no, format!("bad mask character `{other}`"))),
            })
            .collect::<Result<Vec<bool>>>()?;
        frames.push(KeypointFrame { coords, detected });
    }

    let label_line_no = header.t_clip + 2;
    let (_, line) = lines
        .next()
        .ok_or_else(|| parse_err(label_line_no, "missing label record".into()))?;
    let record: LabelRecord = serde_json::from_str(&line?)
        .map_err(|e| parse_err(label_line_no, format!("bad label record: {e}")))?;
    if let Some((_, extra)) = lines.next() {
        if !extra?.trim().is_empty() {
            return Err(parse_err(
                label_line_no + 1,
                "trailing content after label record".into(),
            ));
        }
    }

    let mut clip = KeypointClip {
        clip_id: header.clip_id,
        fps: header.fps,
        layout,
        frames,
        labels: record
            .labels
            .into_iter()
            .map(|(class_id, frame)| EventLabel { class_id, frame })
            .collect(),
    };
    if clip.clip_id != clip_name {
        return Err(CoreError::Validation {
            clip: clip_name.clone(),
            message: format!("header clip_id `{}` does not match file name", clip.clip_id),
        });
    }
    clip.normalize_and_validate()?;
    Ok(clip)
}

/// Writes every clip as `<clip_id>.jsonl` under `path` (created if missing).
pub fn save_dataset(clips: &[KeypointClip], path: &Path) -> Result<()> {
    fs::create_dir_all(path)?;
    for clip in clips {
        save_clip(clip, &path.join(format!("{}.jsonl", clip.clip_id)))?;
    }
    Ok(())
}

/// Serializes one clip in the canonical record format.
pub fn save_clip(clip: &KeypointClip, file: &Path) -> Result<()> {
    let mut out = String::new();
    let header = HeaderRecord {
        clip_id: clip.clip_id.clone(),
        t_clip: clip.frames.len(),
        num_persons: clip.layout.num_persons,
        joints_per_person: clip.layout.joints_per_person,
        has_ball: clip.layout.has_ball,
        num_court_points: clip.layout.num_court_points,
        fps: clip.fps,
    };
    out.push_str(&serde_json::to_string(&header).expect("header serializes"));
    out.push('\n');
    for (t, frame) in clip.frames.iter().enumerate() {
        let record = FrameRecord {
            frame_index: t,
            coords: frame.coords.iter().flatten().copied().collect(),
            mask: frame
                .detected
                .iter()
                .map(|&d| if d { '1' } else { '0' })
                .collect(),
        };
        out.push_str(&serde_json::to_string(&record).expect("frame serializes"));
        out.push('\n');
    }
    let labels = LabelRecord {
        labels: clip.labels.iter().map(|l| (l.class_id, l.frame)).collect(),
    };
    out.push_str(&serde_json::to_string(&labels).expect("labels serialize"));
    out.push('\n');

    let mut file = fs::File::create(file)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}
