//! Run configuration: a JSON file whose values command-line flags override.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vtembed_core::text::{DEFAULT_MAX_TOKENS, DEFAULT_WIDTH};
use vtembed_core::{BatchConfig, Dims, Preset};

use crate::error::{read_text, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// `desk` or `paper`.
    pub preset: String,
    pub manifest: Option<PathBuf>,
    pub features: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    /// Stop-word list; the bundled list is used when absent.
    pub stopwords: Option<PathBuf>,
    /// Checkpoint to fine-tune from.
    pub init: Option<PathBuf>,
    /// Checkpoint written by `train`.
    pub out: Option<PathBuf>,
    /// Training log written by `train`.
    pub log: Option<PathBuf>,
    pub max_rank: Option<u32>,
    pub max_videos: Option<usize>,
    pub max_tokens: usize,
    pub conv_width: usize,
    pub training: BatchConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            preset: Preset::Desk.name().into(),
            manifest: None,
            features: None,
            embeddings: None,
            stopwords: None,
            init: None,
            out: None,
            log: None,
            max_rank: None,
            max_videos: None,
            max_tokens: DEFAULT_MAX_TOKENS,
            conv_width: DEFAULT_WIDTH,
            training: BatchConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_text(path)?)
    }

    pub fn preset(&self) -> Result<Preset> {
        Preset::from_name(&self.preset)
            .ok_or_else(|| Error::Format(format!("unknown preset {:?} (expected desk or paper)", self.preset)))
    }

    pub fn dims(&self, word_dim: usize) -> Result<Dims> {
        let mut dims = self.preset()?.dims(word_dim);
        dims.max_tokens = self.max_tokens;
        dims.conv_width = self.conv_width;
        Ok(dims)
    }

    /// The configuration as echoed into artifacts: output locations are left
    /// out so that identical runs produce identical bytes wherever they write.
    pub fn echo(&self) -> serde_json::Value {
        let mut c = self.clone();
        c.out = None;
        c.log = None;
        serde_json::to_value(c).expect("config serializes")
    }
}
