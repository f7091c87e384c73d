//! JSON-lines record formats and their readers and writers.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use pedcal_core::calibration::BoundingBox;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectClass {
    Person,
    Vehicle,
}

/// One detection box. `id` defaults to the record's position in the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<u64>,
    pub frame_id: i64,
    pub object_class: ObjectClass,
    pub left: f64,
    pub top: f64,
    pub right: f64,
    pub bottom: f64,
}

/// A validated detection with its resolved id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub id: u64,
    pub frame_id: i64,
    pub class: ObjectClass,
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PositionStatus {
    Ok,
    /// The pixel's ray does not meet the ground in front of the camera.
    Degenerate,
}

/// Ground position of one record; coordinates are absent when degenerate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PositionRecord {
    pub id: u64,
    pub frame_id: i64,
    pub object_class: ObjectClass,
    pub x: Option<f64>,
    pub y: Option<f64>,
    pub z: Option<f64>,
    pub status: PositionStatus,
}

impl PositionRecord {
    pub fn located(id: u64, frame_id: i64, object_class: ObjectClass, p: [f64; 3]) -> Self {
        Self {
            id,
            frame_id,
            object_class,
            x: Some(p[0]),
            y: Some(p[1]),
            z: Some(p[2]),
            status: PositionStatus::Ok,
        }
    }

    pub fn ground(&self) -> Option<(f64, f64)> {
        match (self.status, self.x, self.y) {
            (PositionStatus::Ok, Some(x), Some(y)) => Some((x, y)),
            _ => None,
        }
    }
}

/// Ground-truth and estimated distance of one person-vehicle pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_id: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub person_id: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vehicle_id: Option<u64>,
    pub gt_distance_m: f64,
    pub est_distance_m: f64,
}

/// Parses one JSON object per non-blank line. Errors carry `path:line`.
pub fn parse_jsonl<T: DeserializeOwned>(
    text: &str,
    origin: &str,
) -> Result<Vec<(usize, T)>, CliError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line)
            .map_err(|e| CliError::input(format!("{origin}:{}: {e}", i + 1)))?;
        out.push((i + 1, record));
    }
    if out.is_empty() {
        return Err(CliError::input(format!("{origin}: no records")));
    }
    Ok(out)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    parse_jsonl(&text, &path.display().to_string())
}

pub fn parse_detections(text: &str, origin: &str) -> Result<Vec<Detection>, CliError> {
    parse_jsonl::<DetectionRecord>(text, origin)?
        .into_iter()
        .enumerate()
        .map(|(index, (line, r))| {
            let bbox = BoundingBox::new(r.left, r.top, r.right, r.bottom)
                .map_err(|e| CliError::input(format!("{origin}:{line}: {e}")))?;
            Ok(Detection {
                id: r.id.unwrap_or(index as u64),
                frame_id: r.frame_id,
                class: r.object_class,
                bbox,
            })
        })
        .collect()
}

pub fn read_detections(path: &Path) -> Result<Vec<Detection>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    parse_detections(&text, &path.display().to_string())
}

pub fn read_positions(path: &Path) -> Result<Vec<PositionRecord>, CliError> {
    Ok(read_jsonl(path)?.into_iter().map(|(_, r)| r).collect())
}

pub fn to_jsonl<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for r in records {
        // Plain data structs always serialize.
        let line = serde_json::to_string(r).expect("serializable record");
        let _ = writeln!(out, "{line}");
    }
    out
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable report");
    s.push('\n');
    s
}

/// Writes to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match path {
        Some(p) => {
            fs::write(p, contents).map_err(|e| CliError::input(format!("{}: {e}", p.display())))
        }
        None => io::stdout()
            .write_all(contents.as_bytes())
            .map_err(|e| CliError::input(format!("stdout: {e}"))),
    }
}
