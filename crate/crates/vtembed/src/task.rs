//! Task files: ordered step descriptions plus per-video step intervals.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use vtembed_core::eval::TaskSpec;

use crate::error::{read_text, write_file, Result};

#[derive(Serialize, Deserialize)]
struct Span {
    step: usize,
    start: f64,
    end: f64,
}

#[derive(Serialize, Deserialize)]
struct TaskFile {
    task_id: String,
    steps: Vec<String>,
    #[serde(default)]
    annotations: BTreeMap<String, Vec<Span>>,
}

pub fn parse_task(text: &str) -> Result<TaskSpec> {
    let file: TaskFile = serde_json::from_str(text)?;
    let task = TaskSpec {
        task_id: file.task_id,
        steps: file.steps,
        annotations: file
            .annotations
            .into_iter()
            .map(|(video, spans)| {
                (
                    video,
                    spans.into_iter().map(|s| (s.step, s.start, s.end)).collect(),
                )
            })
            .collect(),
    };
    task.validate()?;
    Ok(task)
}

pub fn read_task(path: &Path) -> Result<TaskSpec> {
    parse_task(&read_text(path)?)
}

pub fn task_to_string(task: &TaskSpec) -> String {
    let file = TaskFile {
        task_id: task.task_id.clone(),
        steps: task.steps.clone(),
        annotations: task
            .annotations
            .iter()
            .map(|(video, spans)| {
                (
                    video.clone(),
                    spans
                        .iter()
                        .map(|&(step, start, end)| Span { step, start, end })
                        .collect(),
                )
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).expect("task serializes")
}

pub fn write_task(path: &Path, task: &TaskSpec) -> Result<()> {
    write_file(path, task_to_string(task).as_bytes())
}
