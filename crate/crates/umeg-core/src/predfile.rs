//! Line-delimited prediction file: one record per clip,
//! `{clip_id, events: [[class_id, frame], ...]}`. Written by the spotting
//! side and consumed by the metrics side.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::EventLabel;
use crate::spot::EventSequence;
use crate::{CoreError, Result};

#[derive(Serialize, Deserialize)]
struct PredictionRecord {
    clip_id: String,
    events: Vec<(usize, usize)>,
}

/// Writes per-clip predictions, one JSON record per line, in input order.
pub fn write_predictions(path: &Path, predictions: &[(String, EventSequence)]) -> Result<()> {
    let mut out = String::new();
    for (clip_id, events) in predictions {
        let record = PredictionRecord {
            clip_id: clip_id.clone(),
            events: events.iter().map(|e| (e.class_id, e.frame)).collect(),
        };
        out.push_str(&serde_json::to_string(&record).expect("prediction serializes"));
        out.push('\n');
    }
    let mut file = fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

/// Reads a prediction file back into (clip id, events) pairs.
pub fn read_predictions(path: &Path) -> Result<Vec<(String, EventSequence)>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PredictionRecord =
            serde_json::from_str(&line).map_err(|e| CoreError::Parse {
                clip: path.display().to_string(),
                line: i + 1,
                message: format!("bad prediction record: {e}"),
            })?;
        let events = record
            .events
            .into_iter()
            .map(|(class_id, frame)| EventLabel { class_id, frame })
            .collect();
        out.push((record.clip_id, events));
    }
    Ok(out)
}
