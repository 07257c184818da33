//! JSON-lines clip manifests.

use std::path::Path;

use serde::{Deserialize, Serialize};
use vtembed_core::{ClipRecord, Dataset};

use crate::error::{read_text, write_file, Error, Result};

#[derive(Serialize, Deserialize)]
struct Line {
    clip_id: String,
    video_id: String,
    start: f64,
    end: f64,
    caption: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    search_rank: Option<u32>,
}

/// Parses a manifest; blank lines are skipped, errors carry the line number.
pub fn parse_manifest(text: &str) -> Result<Dataset> {
    let mut records = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.trim().is_empty() {
            continue;
        }
        let line: Line = serde_json::from_str(raw).map_err(|e| Error::Line {
            line: i + 1,
            message: e.to_string(),
        })?;
        let record = ClipRecord {
            clip_id: line.clip_id,
            video_id: line.video_id,
            start: line.start,
            end: line.end,
            caption: line.caption,
            search_rank: line.search_rank,
        };
        record.validate().map_err(|e| Error::Line {
            line: i + 1,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(Dataset::from_records(records)?)
}

pub fn read_manifest(path: &Path) -> Result<Dataset> {
    parse_manifest(&read_text(path)?)
}

pub fn manifest_to_string(records: &[ClipRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let line = Line {
            clip_id: r.clip_id.clone(),
            video_id: r.video_id.clone(),
            start: r.start,
            end: r.end,
            caption: r.caption.clone(),
            search_rank: r.search_rank,
        };
        out.push_str(&serde_json::to_string(&line).expect("manifest line serializes"));
        out.push('\n');
    }
    out
}

pub fn write_manifest(path: &Path, records: &[ClipRecord]) -> Result<()> {
    write_file(path, manifest_to_string(records).as_bytes())
}
