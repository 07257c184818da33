//! The `vtembed` command line. Exit status: 0 success, 1 usage error, 2 data error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use vtembed_core::index::{fingerprint, query_text};
use vtembed_core::synth::{generate_synthetic, SynthConfig};
use vtembed_core::trainer::{
    batch_rng, gradient_check, probe_rng, sample_minibatch, GradCheckOptions,
};
use vtembed_core::Preset;

use crate::checkpoint::{read_checkpoint, write_checkpoint, Checkpoint};
use crate::config::RunConfig;
use crate::embeddings::{read_word_embeddings, write_stopwords, write_word_embeddings};
use crate::features::{read_feature_store, write_feature_store};
use crate::index_file::{read_index, write_index};
use crate::manifest::{read_manifest, write_manifest};
use crate::pipeline::{
    build_index, evaluate_retrieval, localize_task, prepare_corpus, summarize_localization,
};
use crate::task::{read_task, write_task};
use crate::train::{initial_parameters, load_inputs, train_from_config};

#[derive(Parser, Debug)]
#[command(name = "vtembed", version, about = "Joint text-video embedding from clip-caption pairs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a synthetic dataset (manifest, features, word vectors, task).
    Synth(SynthArgs),
    /// Train, or fine-tune with --init, and write a checkpoint.
    Train(TrainArgs),
    /// Compare analytic gradients with central differences on one minibatch.
    GradCheck(GradCheckArgs),
    /// Caption-to-clip retrieval metrics for a checkpoint.
    EvalRetrieval(EvalArgs),
    /// Ordered step localization and recall for task files.
    Localize(LocalizeArgs),
    /// Embed a clip corpus into an index file.
    Index(IndexArgs),
    /// Top-k clips for a text query.
    Query(QueryArgs),
    /// Dataset and model size summary.
    Stats(StatsArgs),
}

#[derive(Args, Debug, Default, Clone)]
pub struct DataArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    /// Keep only records whose search rank is at most N.
    #[arg(long, value_name = "N")]
    pub max_rank: Option<u32>,
    /// Keep only the first N videos of the manifest.
    #[arg(long, value_name = "N")]
    pub max_videos: Option<usize>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct TrainingFlags {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `desk` or `paper`.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Distinct videos per minibatch.
    #[arg(long)]
    pub videos: Option<usize>,
    /// Pairs sampled with replacement per video.
    #[arg(long)]
    pub pairs_per_video: Option<usize>,
    /// Target share of intra-video negatives.
    #[arg(long)]
    pub p_intra: Option<f64>,
    #[arg(long)]
    pub margin: Option<f64>,
    /// Share of highest-scoring positives kept per video.
    #[arg(long)]
    pub max_pool_rate: Option<f64>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Divisor applied to the summed loss before differentiation.
    #[arg(long)]
    pub loss_scale: Option<f64>,
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub flags: TrainingFlags,
    /// Checkpoint to fine-tune from (weights only; the optimizer restarts).
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// Checkpoint to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON-lines training log.
    #[arg(long)]
    pub log: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GradCheckArgs {
    #[command(flatten)]
    pub flags: TrainingFlags,
    /// Check at these weights instead of a fresh initialization.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    pub coordinates: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub step: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct LocalizeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Task file; repeat for several tasks.
    #[arg(long, required = true)]
    pub task: Vec<PathBuf>,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct IndexArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Clips to index; every clip of the feature store without it.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub features: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct QueryArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub text: String,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Report parameter counts for this preset.
    #[arg(long)]
    pub preset: Option<String>,
    /// Word vector size used for the preset counts when no embeddings are given.
    #[arg(long, default_value_t = 300)]
    pub word_dim: usize,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON generator configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub topics: Option<usize>,
    #[arg(long)]
    pub videos_per_topic: Option<usize>,
    #[arg(long)]
    pub clips_per_video: Option<usize>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub vocab_per_topic: Option<usize>,
    #[arg(long)]
    pub words_per_caption: Option<usize>,
    #[arg(long)]
    pub feature_dim: Option<usize>,
    #[arg(long)]
    pub word_dim: Option<usize>,
    #[arg(long)]
    pub video_offset: Option<f64>,
    #[arg(long)]
    pub content_weight: Option<f64>,
    /// Also write train.jsonl and test.jsonl, holding out the last N videos.
    #[arg(long, value_name = "N")]
    pub holdout_videos: Option<usize>,
}

/// A failure and the exit status it maps to.
#[derive(Debug)]
pub enum CliError {
    Usage(anyhow::Error),
    Data(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Data(e.into())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl std::fmt::Display) -> CliError {
    CliError::Usage(anyhow!("{msg}"))
}

fn input(path: &Path) -> CliResult<&Path> {
    if path.exists() {
        Ok(path)
    } else {
        Err(usage(format!("{}: no such file", path.display())))
    }
}

fn opt_input(path: &Option<PathBuf>) -> CliResult<Option<&Path>> {
    path.as_deref().map(input).transpose()
}

fn emit(report: &serde_json::Value, out: Option<&Path>) -> CliResult<()> {
    let text = format!("{}\n", serde_json::to_string_pretty(report).expect("report serializes"));
    if let Some(path) = out {
        std::fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
    }
    // a closed stdout (e.g. piped into `head`) is not an error
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
            Err(CliError::Data(anyhow::Error::new(e).context("writing to stdout")))
        }
        _ => Ok(()),
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn set_opt<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

impl TrainingFlags {
    /// The config file, if any, overridden by every flag that was given.
    pub fn resolve(&self) -> CliResult<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(input(path)?)
                .map_err(|e| usage(format!("{}: {e}", path.display())))?,
            None => RunConfig::default(),
        };
        let t = &mut c.training;
        set(&mut t.seed, self.seed);
        set(&mut t.epochs, self.epochs);
        set(&mut t.videos, self.videos);
        set(&mut t.pairs_per_video, self.pairs_per_video);
        set(&mut t.p_intra, self.p_intra);
        set(&mut t.margin, self.margin);
        set(&mut t.max_pool_rate, self.max_pool_rate);
        set(&mut t.adam.learning_rate, self.lr);
        set(&mut t.loss_scale, self.loss_scale);
        set(&mut c.preset, self.preset.clone());
        let d = &self.data;
        set_opt(&mut c.manifest, d.manifest.clone());
        set_opt(&mut c.features, d.features.clone());
        set_opt(&mut c.embeddings, d.embeddings.clone());
        set_opt(&mut c.stopwords, d.stopwords.clone());
        set_opt(&mut c.max_rank, d.max_rank);
        set_opt(&mut c.max_videos, d.max_videos);
        c.preset().map_err(usage)?;
        c.training.validate().map_err(usage)?;
        for (what, p) in [
            ("manifest", &c.manifest),
            ("features", &c.features),
            ("embeddings", &c.embeddings),
        ] {
            match p {
                None => return Err(usage(format!("missing --{what}"))),
                Some(p) => {
                    input(p)?;
                }
            }
        }
        opt_input(&c.stopwords)?;
        Ok(c)
    }
}

fn cmd_synth(a: &SynthArgs) -> CliResult<()> {
    let mut c: SynthConfig = match &a.config {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(input(p)?)?)
            .map_err(|e| usage(format!("{}: {e}", p.display())))?,
        None => SynthConfig::default(),
    };
    set(&mut c.seed, a.seed);
    set(&mut c.topics, a.topics);
    set(&mut c.videos_per_topic, a.videos_per_topic);
    set(&mut c.clips_per_video, a.clips_per_video);
    set(&mut c.noise, a.noise);
    set(&mut c.vocab_per_topic, a.vocab_per_topic);
    set(&mut c.words_per_caption, a.words_per_caption);
    set(&mut c.feature_dim, a.feature_dim);
    set(&mut c.word_dim, a.word_dim);
    set(&mut c.video_offset, a.video_offset);
    set(&mut c.content_weight, a.content_weight);
    let data = generate_synthetic(&c).map_err(usage)?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let at = |name: &str| a.out.join(name);
    write_manifest(&at("manifest.jsonl"), data.dataset.records())?;
    write_feature_store(&at("features.xmfs"), &data.features)?;
    write_word_embeddings(&at("embeddings.txt"), &data.words)?;
    write_stopwords(&at("stopwords.txt"), &data.words)?;
    write_task(&at("task.json"), &data.task)?;
    let mut report = json!({
        "config": c,
        "records": data.dataset.len(),
        "videos": data.dataset.groups().len(),
        "out": a.out,
    });
    if let Some(n) = a.holdout_videos {
        if n >= data.dataset.groups().len() {
            return Err(usage("--holdout-videos must leave at least one training video"));
        }
        let (train, test) = data.dataset.clone().split_videos(n);
        write_manifest(&at("train.jsonl"), train.records())?;
        write_manifest(&at("test.jsonl"), test.records())?;
        report["train_records"] = json!(train.len());
        report["test_records"] = json!(test.len());
    }
    std::fs::write(
        at("synth.json"),
        serde_json::to_string_pretty(&c).expect("config serializes") + "\n",
    )?;
    emit(&report, None)
}

fn cmd_train(a: &TrainArgs) -> CliResult<()> {
    let mut c = a.flags.resolve()?;
    set_opt(&mut c.init, a.init.clone());
    set_opt(&mut c.out, a.out.clone());
    set_opt(&mut c.log, a.log.clone());
    opt_input(&c.init)?;
    let out = c.out.clone().ok_or_else(|| usage("missing --out"))?;
    let mut log_file = match &c.log {
        Some(p) => Some(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => None,
    };
    let ckpt = train_from_config(&c, log_file.as_mut().map(|w| w as &mut dyn Write))?;
    if let Some(mut w) = log_file {
        w.flush()?;
    }
    write_checkpoint(&out, &ckpt)?;
    let steps = ckpt.optimizer.as_ref().map_or(0, |s| s.step);
    emit(
        &json!({
            "checkpoint": out,
            "steps": steps,
            "parameters": ckpt.params.parameter_count(),
            "fingerprint": hex::encode(fingerprint(&ckpt.params)),
            "config": c.echo(),
        }),
        None,
    )
}

fn cmd_grad_check(a: &GradCheckArgs) -> CliResult<()> {
    let mut c = a.flags.resolve()?;
    set_opt(&mut c.init, a.checkpoint.clone());
    opt_input(&c.init)?;
    let inputs = load_inputs(&c)?;
    let corpus = prepare_corpus(&inputs.dataset, &inputs.features, &inputs.words, c.max_tokens)?;
    let params = initial_parameters(&c, inputs.words.dim())?;
    let t = &c.training;
    let batch = sample_minibatch(&corpus, t.videos, t.pairs_per_video, &mut batch_rng(t.seed))?;
    let options = GradCheckOptions {
        coordinates: a.coordinates,
        step: a.step,
        tolerance: a.tolerance,
        ..GradCheckOptions::default()
    };
    let report = gradient_check(&params, &corpus, &batch, t, &options, &mut probe_rng(t.seed))?;
    let tensors: Vec<_> = report
        .tensors
        .iter()
        .map(|t| json!({"name": t.name, "checked": t.checked, "max_rel_error": t.max_rel_error}))
        .collect();
    emit(
        &json!({
            "passed": report.passed,
            "max_rel_error": report.max_rel_error,
            "worst_tensor": report.worst_tensor,
            "checked": report.checked,
            "tolerance": a.tolerance,
            "tensors": tensors,
            "config": c.echo(),
        }),
        None,
    )?;
    if !report.passed {
        return Err(CliError::Data(anyhow!(
            "gradient check failed: {} has relative error {:.3e}",
            report.worst_tensor,
            report.max_rel_error
        )));
    }
    Ok(())
}

/// A path from the command line, else the one recorded in the checkpoint's config.
fn path_or_recorded(
    given: &Option<PathBuf>,
    recorded: &Option<PathBuf>,
    what: &str,
) -> CliResult<PathBuf> {
    let p = given
        .clone()
        .or_else(|| recorded.clone())
        .ok_or_else(|| usage(format!("missing --{what}")))?;
    input(&p)?;
    Ok(p)
}

fn load_checkpoint_with_config(path: &Path) -> CliResult<(Checkpoint, RunConfig)> {
    let ckpt = read_checkpoint(input(path)?, None)?;
    let recorded: RunConfig = serde_json::from_value(ckpt.config.run.clone()).unwrap_or_default();
    Ok((ckpt, recorded))
}

fn cmd_eval(a: &EvalArgs) -> CliResult<()> {
    let (ckpt, recorded) = load_checkpoint_with_config(&a.checkpoint)?;
    let d = &a.data;
    let manifest = path_or_recorded(&d.manifest, &recorded.manifest, "manifest")?;
    let features = path_or_recorded(&d.features, &recorded.features, "features")?;
    let embeddings = path_or_recorded(&d.embeddings, &recorded.embeddings, "embeddings")?;
    let stopwords = d.stopwords.clone().or(recorded.stopwords.clone());
    opt_input(&stopwords)?;
    let mut dataset = read_manifest(&manifest)?;
    if let Some(r) = d.max_rank {
        dataset = dataset.filter_max_rank(r);
    }
    if let Some(n) = d.max_videos {
        dataset = dataset.take_videos(n);
    }
    let store = read_feature_store(&features)?;
    let words = read_word_embeddings(&embeddings, stopwords.as_deref())?;
    let corpus = prepare_corpus(&dataset, &store, &words, ckpt.params.dims.max_tokens)?;
    let report = evaluate_retrieval(&ckpt.params, &corpus)?;
    let mut out = serde_json::to_value(report).expect("report serializes");
    out["checkpoint"] = json!(a.checkpoint);
    out["manifest"] = json!(manifest);
    out["checkpoint_config"] = ckpt.config.run.clone();
    emit(&out, a.out.as_deref())
}

fn cmd_localize(a: &LocalizeArgs) -> CliResult<()> {
    let (ckpt, recorded) = load_checkpoint_with_config(&a.checkpoint)?;
    let features = path_or_recorded(&a.features, &recorded.features, "features")?;
    let embeddings = path_or_recorded(&a.embeddings, &recorded.embeddings, "embeddings")?;
    let stopwords = a.stopwords.clone().or(recorded.stopwords.clone());
    opt_input(&stopwords)?;
    let tasks = a
        .task
        .iter()
        .map(|p| Ok(read_task(input(p)?)?))
        .collect::<CliResult<Vec<_>>>()?;
    let store = read_feature_store(&features)?;
    let words = read_word_embeddings(&embeddings, stopwords.as_deref())?;
    let results = tasks
        .iter()
        .map(|t| localize_task(&ckpt.params, t, &store, &words))
        .collect::<crate::Result<Vec<_>>>()?;
    let counts: Vec<usize> = tasks.iter().map(|t| t.steps.len()).collect();
    let report = summarize_localization(results, &counts);
    let mut out = serde_json::to_value(report).expect("report serializes");
    out["checkpoint"] = json!(a.checkpoint);
    out["checkpoint_config"] = ckpt.config.run.clone();
    emit(&out, a.out.as_deref())
}

fn cmd_index(a: &IndexArgs) -> CliResult<()> {
    let (ckpt, recorded) = load_checkpoint_with_config(&a.checkpoint)?;
    let features = path_or_recorded(&a.features, &recorded.features, "features")?;
    let dataset = opt_input(&a.manifest)?.map(read_manifest).transpose()?;
    let store = read_feature_store(&features)?;
    let index = build_index(&ckpt.params, &store, dataset.as_ref())?;
    write_index(&a.out, &index)?;
    emit(
        &json!({
            "index": a.out,
            "clips": index.len(),
            "dim": index.dim,
            "fingerprint": hex::encode(index.fingerprint),
            "checkpoint": a.checkpoint,
            "features": features,
            "manifest": a.manifest,
        }),
        None,
    )
}

fn cmd_query(a: &QueryArgs) -> CliResult<()> {
    let index = read_index(input(&a.index)?)?;
    let (ckpt, recorded) = load_checkpoint_with_config(&a.checkpoint)?;
    if a.k == 0 {
        return Err(usage("--k must be at least 1"));
    }
    let embeddings = path_or_recorded(&a.embeddings, &recorded.embeddings, "embeddings")?;
    let stopwords = a.stopwords.clone().or(recorded.stopwords.clone());
    opt_input(&stopwords)?;
    let words = read_word_embeddings(&embeddings, stopwords.as_deref())?;
    let hits = query_text(&index, &a.text, &words, a.k, &ckpt.params)?;
    let hits: Vec<_> = hits
        .iter()
        .map(|h| json!({"clip_id": h.clip_id, "score": h.score}))
        .collect();
    emit(&json!({"query": a.text, "k": a.k, "hits": hits}), None)
}

fn cmd_stats(a: &StatsArgs) -> CliResult<()> {
    let mut report = json!({});
    let d = &a.data;
    let words = match opt_input(&d.embeddings)? {
        Some(p) => Some(read_word_embeddings(p, opt_input(&d.stopwords)?)?),
        None => None,
    };
    if let Some(path) = opt_input(&d.manifest)? {
        let mut dataset = read_manifest(path)?;
        if let Some(r) = d.max_rank {
            dataset = dataset.filter_max_rank(r);
        }
        if let Some(n) = d.max_videos {
            dataset = dataset.take_videos(n);
        }
        report["records"] = json!(dataset.len());
        report["videos"] = json!(dataset.groups().len());
        if let (Some(fp), Some(w)) = (opt_input(&d.features)?, &words) {
            let store = read_feature_store(fp)?;
            let corpus = prepare_corpus(&dataset, &store, w, vtembed_core::text::DEFAULT_MAX_TOKENS)?;
            report["usable_pairs"] = json!(corpus.len());
            report["dropped_empty_captions"] = json!(dataset.len() - corpus.len());
        }
    }
    if let Some(w) = &words {
        report["vocabulary"] = json!(w.len());
        report["word_dim"] = json!(w.dim());
        report["stopwords"] = json!(w.stopwords().count());
    }
    if let Some(p) = opt_input(&d.features)? {
        let store = read_feature_store(p)?;
        report["feature_dim"] = json!(store.dim());
        report["feature_clips"] = json!(store.clips().len());
        report["feature_videos"] = json!(store.videos().len());
    }
    if let Some(p) = &a.checkpoint {
        let (ckpt, _) = load_checkpoint_with_config(p)?;
        report["checkpoint"] = json!({
            "preset": ckpt.config.preset,
            "dims": ckpt.config.dims,
            "parameters": ckpt.params.parameter_count(),
            "gated_parameters": ckpt.params.dims.gated_parameter_count(),
            "fingerprint": hex::encode(fingerprint(&ckpt.params)),
            "optimizer_step": ckpt.optimizer.as_ref().map(|s| s.step),
        });
    }
    if let Some(name) = &a.preset {
        let preset = Preset::from_name(name)
            .ok_or_else(|| usage(format!("unknown preset {name:?} (expected desk or paper)")))?;
        let word_dim = words.as_ref().map_or(a.word_dim, |w| w.dim());
        let dims = preset.dims(word_dim);
        report["preset"] = json!({
            "name": preset.name(),
            "word_dim": word_dim,
            "gated_parameters": dims.gated_parameter_count(),
            "encoder_parameters": dims.encoder_parameter_count(),
            "parameters": dims.parameter_count(),
        });
    }
    emit(&report, None)
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("XM_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| usage(format!("XM_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Data(e.into()))
}

pub fn run(cli: &Cli) -> CliResult<()> {
    configure_threads()?;
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::GradCheck(a) => cmd_grad_check(a),
        Command::EvalRetrieval(a) => cmd_eval(a),
        Command::Localize(a) => cmd_localize(a),
        Command::Index(a) => cmd_index(a),
        Command::Query(a) => cmd_query(a),
        Command::Stats(a) => cmd_stats(a),
    }
}

/// Parses `args`, runs the command and maps the outcome to an exit status.
pub fn main_from<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(CliError::Data(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

