//! Dataset-level operations shared by the command line and the tests.
//! Embedding work is spread over the rayon pool; results are collected in input
//! order so every output is independent of the worker count.

use std::io::Write;

use log::info;
use rayon::prelude::*;
use serde::Serialize;
use vtembed_core::eval::{
    localize_embedded, localization_recall, retrieval_metrics, retrieval_ranks, RetrievalReport,
    TaskSpec,
};
use vtembed_core::index::{index_from_embeddings, EmbeddedCorpus};
use vtembed_core::text::tokenize_and_filter;
use vtembed_core::trainer::StepReport;
use vtembed_core::{
    Corpus, Dataset, Error as CoreError, FeatureStore, ModelParameters, WordEmbeddingTable,
};

use crate::error::{Error, Result};

/// Builds the pair corpus and logs how many captions were empty after filtering.
pub fn prepare_corpus(
    dataset: &Dataset,
    store: &FeatureStore,
    table: &WordEmbeddingTable,
    max_tokens: usize,
) -> Result<Corpus> {
    let (corpus, dropped) = Corpus::build(dataset, store, table, max_tokens)?;
    if dropped > 0 {
        info!("dropped {dropped} clips whose caption is empty after stop-word removal");
    }
    Ok(corpus)
}

pub fn embed_clips(params: &ModelParameters, corpus: &Corpus) -> Result<Vec<Vec<f64>>> {
    Ok(corpus
        .pairs
        .par_iter()
        .map(|p| params.embed_clip(&p.clip))
        .collect::<std::result::Result<Vec<_>, CoreError>>()?)
}

pub fn embed_captions(params: &ModelParameters, corpus: &Corpus) -> Result<Vec<Vec<f64>>> {
    Ok(corpus
        .pairs
        .par_iter()
        .map(|p| params.embed_caption(&p.caption))
        .collect::<std::result::Result<Vec<_>, CoreError>>()?)
}

/// Every caption queries all clips of the corpus.
pub fn evaluate_retrieval(params: &ModelParameters, corpus: &Corpus) -> Result<RetrievalReport> {
    let clips = embed_clips(params, corpus)?;
    let captions = embed_captions(params, corpus)?;
    let ids: Vec<&str> = corpus.pairs.iter().map(|p| p.clip_id.as_str()).collect();
    Ok(retrieval_metrics(&retrieval_ranks(&clips, &captions, &ids))?)
}

/// Index over every clip of `dataset`, or over the whole store without one.
pub fn build_index(
    params: &ModelParameters,
    store: &FeatureStore,
    dataset: Option<&Dataset>,
) -> Result<EmbeddedCorpus> {
    let ids: Vec<&str> = match dataset {
        Some(d) => d.records().iter().map(|r| r.clip_id.as_str()).collect(),
        None => store.clips().iter().map(|(id, _)| id.as_str()).collect(),
    };
    let embedded = ids
        .par_iter()
        .map(|&id| {
            let x: Vec<f64> = store
                .clip(id)
                .ok_or_else(|| CoreError::Invalid(format!("clip {id} has no feature vector")))?
                .iter()
                .map(|&v| v as f64)
                .collect();
            Ok((id.to_string(), params.embed_clip(&x)?))
        })
        .collect::<std::result::Result<Vec<_>, CoreError>>()?;
    Ok(index_from_embeddings(params, embedded)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VideoLocalization {
    pub video_id: String,
    /// Assigned frame index per step.
    pub assignment: Vec<usize>,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskLocalization {
    pub task_id: String,
    pub videos: Vec<VideoLocalization>,
    /// Per-video recall averaged over the task's videos.
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalizationReport {
    pub tasks: Vec<TaskLocalization>,
    /// Mean of the per-task recalls.
    pub mean_task_recall: f64,
    /// Hits over steps, pooled across every video of every task.
    pub pooled_recall: f64,
}

/// Localizes every annotated video of `task` that has frames in `store`.
pub fn localize_task(
    params: &ModelParameters,
    task: &TaskSpec,
    store: &FeatureStore,
    table: &WordEmbeddingTable,
) -> Result<TaskLocalization> {
    task.validate()?;
    let steps = task
        .steps
        .iter()
        .map(|s| tokenize_and_filter(s, table, params.dims.max_tokens))
        .collect::<std::result::Result<Vec<_>, CoreError>>()
        .map_err(|e| Error::Format(format!("task {}: {e}", task.task_id)))?;
    let step_emb = steps
        .iter()
        .map(|s| params.embed_caption(s))
        .collect::<std::result::Result<Vec<_>, CoreError>>()?;
    let mut videos = Vec::new();
    for (video_id, _) in &task.annotations {
        let Some(frames) = store.frames(video_id) else {
            log::warn!("task {}: video {video_id} has no frames, skipped", task.task_id);
            continue;
        };
        let frame_emb = frames
            .par_iter()
            .map(|f| {
                let x: Vec<f64> = f.values.iter().map(|&v| v as f64).collect();
                params.embed_clip(&x)
            })
            .collect::<std::result::Result<Vec<_>, CoreError>>()?;
        let assignment = localize_embedded(&frame_emb, &step_emb)?;
        let timestamps: Vec<f64> = frames.iter().map(|f| f.timestamp).collect();
        let recall = localization_recall(&assignment, &timestamps, &task.intervals_for(video_id));
        videos.push(VideoLocalization {
            video_id: video_id.clone(),
            assignment,
            recall,
        });
    }
    let recall = if videos.is_empty() {
        0.0
    } else {
        videos.iter().map(|v| v.recall).sum::<f64>() / videos.len() as f64
    };
    Ok(TaskLocalization {
        task_id: task.task_id.clone(),
        videos,
        recall,
    })
}

pub fn summarize_localization(tasks: Vec<TaskLocalization>, step_counts: &[usize]) -> LocalizationReport {
    let mean_task_recall = if tasks.is_empty() {
        0.0
    } else {
        tasks.iter().map(|t| t.recall).sum::<f64>() / tasks.len() as f64
    };
    let (mut hits, mut total) = (0.0, 0usize);
    for (t, &n) in tasks.iter().zip(step_counts) {
        for v in &t.videos {
            hits += v.recall * n as f64;
            total += n;
        }
    }
    LocalizationReport {
        pooled_recall: if total == 0 { 0.0 } else { hits / total as f64 },
        mean_task_recall,
        tasks,
    }
}

#[derive(Serialize)]
struct LogLine {
    step: u64,
    loss: f64,
    active_triplets: usize,
}

/// Appends one JSON line per training step.
pub fn write_log_line(out: &mut impl Write, report: &StepReport) -> std::io::Result<()> {
    let line = LogLine {
        step: report.step,
        loss: report.loss,
        active_triplets: report.active_triplets,
    };
    serde_json::to_writer(&mut *out, &line)?;
    out.write_all(b"\n")
}
