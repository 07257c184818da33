//! Retrieval metrics and ordered step localization.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::{Corpus, Frame};
use crate::error::{Error, Result};
use crate::gated::{similarity, ModelParameters};
use crate::matrix::Matrix;
use crate::text::TokenSequence;

/// Recall at 1/5/10 and median rank over a list of 1-based ranks.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RetrievalReport {
    pub queries: usize,
    #[cfg_attr(feature = "serde", serde(rename = "R@1"))]
    pub r_at_1: f64,
    #[cfg_attr(feature = "serde", serde(rename = "R@5"))]
    pub r_at_5: f64,
    #[cfg_attr(feature = "serde", serde(rename = "R@10"))]
    pub r_at_10: f64,
    #[cfg_attr(feature = "serde", serde(rename = "MedR"))]
    pub median_rank: usize,
}

pub fn recall_at(ranks: &[usize], k: usize) -> f64 {
    ranks.iter().filter(|&&r| r <= k).count() as f64 / ranks.len() as f64
}

/// Lower middle element for even counts.
pub fn median_rank(ranks: &[usize]) -> usize {
    let mut sorted = ranks.to_vec();
    sorted.sort_unstable();
    sorted[(sorted.len() - 1) / 2]
}

pub fn retrieval_metrics(ranks: &[usize]) -> Result<RetrievalReport> {
    if ranks.is_empty() {
        return Err(Error::Invalid("rank list is empty".into()));
    }
    if ranks.contains(&0) {
        return Err(Error::Invalid("ranks are 1-based".into()));
    }
    Ok(RetrievalReport {
        queries: ranks.len(),
        r_at_1: recall_at(ranks, 1),
        r_at_5: recall_at(ranks, 5),
        r_at_10: recall_at(ranks, 10),
        median_rank: median_rank(ranks),
    })
}

/// 1-based rank of candidate `truth` when sorting by descending score, ties
/// resolved by ascending candidate id.
pub fn rank_of(scores: &[f64], ids: &[&str], truth: usize) -> usize {
    let s = scores[truth];
    let id = ids[truth];
    1 + scores
        .iter()
        .zip(ids)
        .filter(|(&o, &oid)| o > s || (o == s && oid < id))
        .count()
}

/// For every caption query `i`, the rank of clip `i` among all clips.
pub fn retrieval_ranks(
    clip_embeddings: &[Vec<f64>],
    caption_embeddings: &[Vec<f64>],
    clip_ids: &[&str],
) -> Vec<usize> {
    let mut scores = vec![0.0; clip_embeddings.len()];
    caption_embeddings
        .iter()
        .enumerate()
        .map(|(q, cap)| {
            for (s, clip) in scores.iter_mut().zip(clip_embeddings) {
                *s = similarity(clip, cap).value;
            }
            rank_of(&scores, clip_ids, q)
        })
        .collect()
}

/// Caption-to-clip retrieval over every pair of `corpus`.
pub fn evaluate_retrieval(params: &ModelParameters, corpus: &Corpus) -> Result<RetrievalReport> {
    let clips = corpus
        .pairs
        .iter()
        .map(|p| params.embed_clip(&p.clip))
        .collect::<Result<Vec<_>>>()?;
    let captions = corpus
        .pairs
        .iter()
        .map(|p| params.embed_caption(&p.caption))
        .collect::<Result<Vec<_>>>()?;
    let ids: Vec<&str> = corpus.pairs.iter().map(|p| p.clip_id.as_str()).collect();
    retrieval_metrics(&retrieval_ranks(&clips, &captions, &ids))
}

/// `(step index, start, end)` of one annotated step.
pub type StepInterval = (usize, f64, f64);

/// Ordered step list of a task and per-video ground-truth intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskSpec {
    pub task_id: String,
    pub steps: Vec<String>,
    /// `(video_id, [(step index, start, end)])`.
    pub annotations: Vec<(String, Vec<StepInterval>)>,
}

impl TaskSpec {
    pub fn validate(&self) -> Result<()> {
        if self.steps.is_empty() {
            return Err(Error::Invalid(alloc::format!("task {} has no steps", self.task_id)));
        }
        for (video, spans) in &self.annotations {
            for &(step, start, end) in spans {
                if step >= self.steps.len() {
                    return Err(Error::Invalid(alloc::format!(
                        "task {}: video {video} annotates unknown step {step}",
                        self.task_id
                    )));
                }
                if !(start.is_finite() && end.is_finite() && end > start) {
                    return Err(Error::Invalid(alloc::format!(
                        "task {}: video {video} step {step} has invalid interval",
                        self.task_id
                    )));
                }
            }
        }
        Ok(())
    }

    /// Ground-truth interval of every step for `video_id` (first annotation wins).
    pub fn intervals_for(&self, video_id: &str) -> Vec<Option<(f64, f64)>> {
        let mut out = vec![None; self.steps.len()];
        if let Some((_, spans)) = self.annotations.iter().find(|(v, _)| v == video_id) {
            for &(step, start, end) in spans {
                if out[step].is_none() {
                    out[step] = Some((start, end));
                }
            }
        }
        out
    }
}

/// One frame per step, strictly increasing in step order, maximizing the summed
/// score. `scores` is `frames × steps`. Among optimal assignments the
/// lexicographically earliest is returned.
pub fn ordered_assignment(scores: &Matrix) -> Result<Vec<usize>> {
    let frames = scores.rows();
    let steps = scores.cols();
    if steps == 0 || frames == 0 {
        return Err(Error::Invalid("localization needs at least one frame and one step".into()));
    }
    if steps > frames {
        return Err(Error::TooManySteps { steps, frames });
    }
    // best[s][t]: best total of steps s.. with step s placed at frame t
    let mut best = Matrix::from_fn(steps, frames, |_, _| f64::NEG_INFINITY);
    for s in (0..steps).rev() {
        let last = frames - (steps - s);
        if s + 1 == steps {
            for t in s..=last {
                best.set(s, t, scores.get(t, s));
            }
            continue;
        }
        // running max of best[s+1][t'] over t' > t
        let mut tail = f64::NEG_INFINITY;
        let mut t = frames - (steps - s - 1);
        while t > s {
            t -= 1;
            tail = tail.max(best.get(s + 1, t + 1));
            if t <= last {
                best.set(s, t, scores.get(t, s) + tail);
            }
        }
    }
    let mut out = Vec::with_capacity(steps);
    let mut from = 0;
    for s in 0..steps {
        let mut pick = from;
        for t in from..frames {
            if best.get(s, t) > best.get(s, pick) {
                pick = t;
            }
        }
        out.push(pick);
        from = pick + 1;
    }
    Ok(out)
}

/// Frame embeddings (`f`) against step embeddings (`g`), then [`ordered_assignment`].
pub fn localize_embedded(frame_embeddings: &[Vec<f64>], step_embeddings: &[Vec<f64>]) -> Result<Vec<usize>> {
    let scores = Matrix::from_fn(frame_embeddings.len(), step_embeddings.len(), |t, s| {
        similarity(&frame_embeddings[t], &step_embeddings[s]).value
    });
    ordered_assignment(&scores)
}

/// Assigns each step description to one frame of the video.
pub fn localize_steps(
    frames: &[Frame],
    steps: &[TokenSequence],
    params: &ModelParameters,
) -> Result<Vec<usize>> {
    if steps.len() > frames.len() {
        return Err(Error::TooManySteps {
            steps: steps.len(),
            frames: frames.len(),
        });
    }
    let frame_emb = frames
        .iter()
        .map(|f| {
            let x: Vec<f64> = f.values.iter().map(|&v| v as f64).collect();
            params.embed_clip(&x)
        })
        .collect::<Result<Vec<_>>>()?;
    let step_emb = steps
        .iter()
        .map(|s| params.embed_caption(s))
        .collect::<Result<Vec<_>>>()?;
    localize_embedded(&frame_emb, &step_emb)
}

/// Share of steps whose assigned frame time falls in `[start, end)` of that
/// step's interval; steps without an interval only count in the denominator.
pub fn localization_recall(
    assignment: &[usize],
    timestamps: &[f64],
    intervals: &[Option<(f64, f64)>],
) -> f64 {
    if assignment.is_empty() {
        return 0.0;
    }
    let hits = assignment
        .iter()
        .zip(intervals)
        .filter(|(&frame, interval)| match interval {
            Some((start, end)) => {
                let t = timestamps[frame];
                t >= *start && t < *end
            }
            None => false,
        })
        .count();
    hits as f64 / assignment.len() as f64
}
