//! Training driver: load the inputs named by a [`RunConfig`], train, and
//! package the result as a checkpoint.

use std::io::Write;
use std::path::Path;

use log::info;
use vtembed_core::trainer::{init_rng, StepReport, Trainer};
use vtembed_core::{Corpus, Dataset, FeatureStore, ModelParameters, WordEmbeddingTable};

use crate::checkpoint::{read_checkpoint, Checkpoint, CheckpointConfig};
use crate::config::RunConfig;
use crate::embeddings::read_word_embeddings;
use crate::error::{Error, Result};
use crate::features::read_feature_store;
use crate::manifest::read_manifest;
use crate::pipeline::{prepare_corpus, write_log_line};

pub struct Inputs {
    pub dataset: Dataset,
    pub features: FeatureStore,
    pub words: WordEmbeddingTable,
}

fn required<'a>(path: &'a Option<std::path::PathBuf>, what: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::Format(format!("no {what} path configured")))
}

/// Reads manifest, features and word vectors, then applies the rank and video filters.
pub fn load_inputs(config: &RunConfig) -> Result<Inputs> {
    let mut dataset = read_manifest(required(&config.manifest, "manifest")?)?;
    if let Some(rank) = config.max_rank {
        dataset = dataset.filter_max_rank(rank);
    }
    if let Some(n) = config.max_videos {
        dataset = dataset.take_videos(n);
    }
    let features = read_feature_store(required(&config.features, "features")?)?;
    let words = read_word_embeddings(
        required(&config.embeddings, "embeddings")?,
        config.stopwords.as_deref(),
    )?;
    Ok(Inputs {
        dataset,
        features,
        words,
    })
}

/// Starting parameters: a fresh seeded draw, or the weights of `config.init`.
pub fn initial_parameters(config: &RunConfig, word_dim: usize) -> Result<ModelParameters> {
    let dims = config.dims(word_dim)?;
    match &config.init {
        Some(path) => Ok(read_checkpoint(path, Some(dims))?.params),
        None => Ok(ModelParameters::init(dims, &mut init_rng(config.training.seed))?),
    }
}

/// Runs every epoch of `config.training` on `corpus`, starting from `params`
/// with a fresh optimizer state.
pub fn train_corpus(
    corpus: &Corpus,
    params: ModelParameters,
    config: &RunConfig,
    mut on_step: impl FnMut(&StepReport) -> Result<()>,
) -> Result<Checkpoint> {
    let mut trainer = Trainer::new(params, config.training)?;
    let mut failed = None;
    trainer.run(corpus, |r| {
        if failed.is_none() {
            if let Err(e) = on_step(r) {
                failed = Some(e);
            }
        }
    })?;
    if let Some(e) = failed {
        return Err(e);
    }
    Ok(Checkpoint {
        config: CheckpointConfig {
            preset: config.preset.clone(),
            dims: trainer.params.dims.into(),
            run: config.echo(),
        },
        params: trainer.params,
        optimizer: Some(trainer.state),
    })
}

/// The whole `train` pipeline; `log` receives one JSON line per step.
pub fn train_from_config(config: &RunConfig, log: Option<&mut dyn Write>) -> Result<Checkpoint> {
    let inputs = load_inputs(config)?;
    let corpus = prepare_corpus(
        &inputs.dataset,
        &inputs.features,
        &inputs.words,
        config.max_tokens,
    )?;
    info!(
        "training on {} pairs from {} videos",
        corpus.len(),
        corpus.videos.len()
    );
    let params = initial_parameters(config, inputs.words.dim())?;
    let mut log = log;
    train_corpus(&corpus, params, config, |r| {
        if let Some(out) = log.as_mut() {
            write_log_line(out, r).map_err(|source| Error::Io {
                path: config.log.clone().unwrap_or_default(),
                source,
            })?;
        }
        Ok(())
    })
}
