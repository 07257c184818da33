//! Clip-caption records, pooled and frame-level features, frozen word vectors,
//! and the prepared pair corpus consumed by training and evaluation.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{check_len, Error, Result};
use crate::text::{tokenize_and_filter, TokenSequence};

/// One clip-caption pair of a manifest.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipRecord {
    pub clip_id: String,
    pub video_id: String,
    pub start: f64,
    pub end: f64,
    pub caption: String,
    /// Position of the source video in its search results, if known.
    pub search_rank: Option<u32>,
}

impl ClipRecord {
    pub fn validate(&self) -> Result<()> {
        if self.clip_id.is_empty() {
            return Err(Error::Invalid("empty clip_id".into()));
        }
        if self.video_id.is_empty() {
            return Err(Error::Invalid(format!("clip {}: empty video_id", self.clip_id)));
        }
        if !self.start.is_finite() || !self.end.is_finite() || self.start < 0.0 {
            return Err(Error::Invalid(format!(
                "clip {}: invalid start/end ({}, {})",
                self.clip_id, self.start, self.end
            )));
        }
        if self.end <= self.start {
            return Err(Error::Invalid(format!(
                "clip {}: end ({}) must be greater than start ({})",
                self.clip_id, self.end, self.start
            )));
        }
        Ok(())
    }
}

/// Records of one video, as indices into [`Dataset::records`].
#[derive(Debug, Clone, PartialEq)]
pub struct VideoGroup {
    pub video_id: String,
    pub records: Vec<usize>,
}

/// Validated manifest: records plus their grouping by video in first-seen order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    records: Vec<ClipRecord>,
    groups: Vec<VideoGroup>,
}

impl Dataset {
    pub fn from_records(records: Vec<ClipRecord>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut group_of: BTreeMap<&str, usize> = BTreeMap::new();
        let mut groups: Vec<VideoGroup> = Vec::new();
        for (i, rec) in records.iter().enumerate() {
            rec.validate()?;
            if !seen.insert(rec.clip_id.as_str()) {
                return Err(Error::Invalid(format!("duplicate clip_id {}", rec.clip_id)));
            }
            let g = *group_of.entry(rec.video_id.as_str()).or_insert_with(|| {
                groups.push(VideoGroup {
                    video_id: rec.video_id.clone(),
                    records: Vec::new(),
                });
                groups.len() - 1
            });
            groups[g].records.push(i);
        }
        Ok(Self { records, groups })
    }

    pub fn records(&self) -> &[ClipRecord] {
        &self.records
    }

    pub fn groups(&self) -> &[VideoGroup] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn into_records(self) -> Vec<ClipRecord> {
        self.records
    }

    /// Keeps records whose `search_rank` is known and at most `max_rank`.
    pub fn filter_max_rank(self, max_rank: u32) -> Self {
        let records = self
            .records
            .into_iter()
            .filter(|r| r.search_rank.is_some_and(|k| k <= max_rank))
            .collect();
        Self::from_records(records).expect("subset of a valid dataset is valid")
    }

    /// Keeps the first `n` videos in manifest order.
    pub fn take_videos(self, n: usize) -> Self {
        let keep: BTreeSet<String> = self
            .groups
            .iter()
            .take(n)
            .map(|g| g.video_id.clone())
            .collect();
        let records = self
            .records
            .into_iter()
            .filter(|r| keep.contains(&r.video_id))
            .collect();
        Self::from_records(records).expect("subset of a valid dataset is valid")
    }

    /// Splits by video: the last `holdout` videos go to the second dataset.
    pub fn split_videos(self, holdout: usize) -> (Self, Self) {
        let cut = self.groups.len().saturating_sub(holdout);
        let test_ids: BTreeSet<String> = self.groups[cut..]
            .iter()
            .map(|g| g.video_id.clone())
            .collect();
        let (test, train): (Vec<_>, Vec<_>) = self
            .records
            .into_iter()
            .partition(|r| test_ids.contains(&r.video_id));
        (
            Self::from_records(train).expect("subset of a valid dataset is valid"),
            Self::from_records(test).expect("subset of a valid dataset is valid"),
        )
    }
}

/// One frame-level feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub timestamp: f64,
    pub values: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoFrames {
    pub video_id: String,
    pub frames: Vec<Frame>,
}

/// Per-clip pooled features and optional per-video frame sequences, all of width `dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStore {
    dim: usize,
    clips: Vec<(String, Vec<f32>)>,
    clip_index: BTreeMap<String, usize>,
    videos: Vec<VideoFrames>,
    video_index: BTreeMap<String, usize>,
}

fn check_finite(what: &str, values: &[f32]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what.to_string()))
    }
}

impl FeatureStore {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("feature dimension must be positive".into()));
        }
        Ok(Self {
            dim,
            clips: Vec::new(),
            clip_index: BTreeMap::new(),
            videos: Vec::new(),
            video_index: BTreeMap::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn insert_clip(&mut self, clip_id: String, values: Vec<f32>) -> Result<()> {
        check_len("clip feature", self.dim, values.len())?;
        check_finite(&format!("clip {clip_id}"), &values)?;
        if self.clip_index.contains_key(&clip_id) {
            return Err(Error::Invalid(format!("duplicate clip {clip_id} in feature store")));
        }
        self.clip_index.insert(clip_id.clone(), self.clips.len());
        self.clips.push((clip_id, values));
        Ok(())
    }

    pub fn insert_video(&mut self, video_id: String, frames: Vec<Frame>) -> Result<()> {
        for (i, frame) in frames.iter().enumerate() {
            check_len("frame feature", self.dim, frame.values.len())?;
            check_finite(&format!("video {video_id} frame {i}"), &frame.values)?;
            if !frame.timestamp.is_finite() {
                return Err(Error::NonFinite(format!("video {video_id} frame {i} timestamp")));
            }
            if i > 0 && frame.timestamp <= frames[i - 1].timestamp {
                return Err(Error::Invalid(format!(
                    "video {video_id}: frame timestamps must be strictly increasing"
                )));
            }
        }
        if self.video_index.contains_key(&video_id) {
            return Err(Error::Invalid(format!("duplicate video {video_id} in feature store")));
        }
        self.video_index.insert(video_id.clone(), self.videos.len());
        self.videos.push(VideoFrames { video_id, frames });
        Ok(())
    }

    pub fn clip(&self, clip_id: &str) -> Option<&[f32]> {
        self.clip_index
            .get(clip_id)
            .map(|&i| self.clips[i].1.as_slice())
    }

    pub fn frames(&self, video_id: &str) -> Option<&[Frame]> {
        self.video_index
            .get(video_id)
            .map(|&i| self.videos[i].frames.as_slice())
    }

    /// Clips in insertion order.
    pub fn clips(&self) -> &[(String, Vec<f32>)] {
        &self.clips
    }

    /// Videos in insertion order.
    pub fn videos(&self) -> &[VideoFrames] {
        &self.videos
    }
}

/// Elementwise maximum over the frames whose timestamp lies in `[start, end)`.
pub fn temporal_max_pool(frames: &[Frame], start: f64, end: f64) -> Result<Vec<f32>> {
    let mut selected = frames
        .iter()
        .filter(|f| f.timestamp >= start && f.timestamp < end);
    let first = selected
        .next()
        .ok_or(Error::NoFramesInInterval { start, end })?;
    let mut out = first.values.clone();
    for frame in selected {
        check_len("frame feature", out.len(), frame.values.len())?;
        for (o, &v) in out.iter_mut().zip(&frame.values) {
            if v > *o {
                *o = v;
            }
        }
    }
    Ok(out)
}

/// Frozen word vectors plus the stop-word list applied before lookup.
#[derive(Debug, Clone, PartialEq)]
pub struct WordEmbeddingTable {
    dim: usize,
    entries: BTreeMap<String, Vec<f64>>,
    stopwords: BTreeSet<String>,
}

impl WordEmbeddingTable {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("word embedding dimension must be positive".into()));
        }
        Ok(Self {
            dim,
            entries: BTreeMap::new(),
            stopwords: BTreeSet::new(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, token: String, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Invalid(format!(
                "token {token}: vector length {} differs from {}",
                vector.len(),
                self.dim
            )));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("embedding of {token}")));
        }
        if self.entries.contains_key(&token) {
            return Err(Error::Invalid(format!("duplicate token {token}")));
        }
        self.entries.insert(token, vector);
        Ok(())
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.entries.get(token).map(Vec::as_slice)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn add_stopword(&mut self, token: &str) {
        self.stopwords.insert(token.to_lowercase());
    }

    pub fn is_stopword(&self, token: &str) -> bool {
        self.stopwords.contains(token)
    }

    pub fn stopwords(&self) -> impl Iterator<Item = &str> {
        self.stopwords.iter().map(String::as_str)
    }
}

/// A clip feature paired with its filtered, embedded caption.
#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub clip_id: String,
    /// Index into [`Corpus::videos`].
    pub video: usize,
    pub clip: Vec<f64>,
    pub caption: TokenSequence,
}

/// Training/evaluation view of a dataset: every pair resolved and embedded.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub pairs: Vec<Pair>,
    /// `(video_id, pair indices)` in manifest order; never empty.
    pub videos: Vec<(String, Vec<usize>)>,
}

impl Corpus {
    /// Resolves features and embeds captions. Pairs whose caption is empty after
    /// filtering are dropped; the second value is how many were dropped.
    pub fn build(
        dataset: &Dataset,
        store: &FeatureStore,
        table: &WordEmbeddingTable,
        max_len: usize,
    ) -> Result<(Self, usize)> {
        let mut corpus = Corpus::default();
        let mut dropped = 0;
        for group in dataset.groups() {
            let mut members = Vec::new();
            for &ri in &group.records {
                let rec = &dataset.records()[ri];
                let feature = store.clip(&rec.clip_id).ok_or_else(|| {
                    Error::Invalid(format!("clip {} missing from feature store", rec.clip_id))
                })?;
                let caption = match tokenize_and_filter(&rec.caption, table, max_len) {
                    Ok(seq) => seq,
                    Err(Error::EmptyCaption) => {
                        dropped += 1;
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                members.push(corpus.pairs.len());
                corpus.pairs.push(Pair {
                    clip_id: rec.clip_id.clone(),
                    video: corpus.videos.len(),
                    clip: feature.iter().map(|&v| v as f64).collect(),
                    caption,
                });
            }
            if !members.is_empty() {
                corpus.videos.push((group.video_id.clone(), members));
            }
        }
        Ok((corpus, dropped))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}
