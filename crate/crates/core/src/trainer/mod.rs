//! Training: minibatch forward/backward through both branches, the weighted
//! ranking objective, Adam updates and an end-to-end finite-difference check.

pub mod adam;
pub mod batch;
pub mod gradcheck;
pub mod loss;

use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Corpus;
use crate::error::{Error, Result};
use crate::gated::{
    accumulate_gated_grads, gated_forward_traced, similarity, GatedTrace, ModelParameters,
    NORM_EPS,
};
use crate::matrix::{dot, norm, Matrix};
use crate::text::{accumulate_encoder_grads, encode_caption_traced, EncoderTrace, TextEncoderGrads};

pub use adam::{adam_step, AdamConfig, OptimizerState};
pub use batch::{
    intra_weight, natural_intra_proportion, negative_weights, sample_minibatch, MiniBatch,
};
pub use gradcheck::{gradient_check, GradCheckOptions, GradCheckReport};
pub use loss::{ranking_loss, retained_count, select_positive_pairs, RankingLoss};

/// Hyper-parameters of a training run.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct BatchConfig {
    /// Distinct videos per minibatch (`v`).
    pub videos: usize,
    /// Pairs drawn with replacement per video (`k`).
    pub pairs_per_video: usize,
    /// Target share of intra-video negatives.
    pub p_intra: f64,
    pub margin: f64,
    /// Share of highest-scoring positives kept per video.
    pub max_pool_rate: f64,
    pub adam: AdamConfig,
    pub epochs: usize,
    pub seed: u64,
    /// The summed loss is divided by this before differentiation.
    pub loss_scale: f64,
}

impl Default for BatchConfig {
    fn default() -> Self {
        Self {
            videos: 32,
            pairs_per_video: 64,
            p_intra: 0.5,
            margin: 0.1,
            max_pool_rate: 1.0,
            adam: AdamConfig::default(),
            epochs: 1,
            seed: 0,
            loss_scale: 1.0,
        }
    }
}

impl BatchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Invalid(msg.into()));
        if self.videos == 0 || self.pairs_per_video == 0 {
            return bad("videos and pairs_per_video must be positive");
        }
        if self.videos * self.pairs_per_video < 2 {
            return bad("a minibatch must hold at least two pairs");
        }
        if !(0.0..1.0).contains(&self.p_intra) {
            return bad("p_intra must lie in [0, 1)");
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return bad("margin must be positive");
        }
        if !(self.max_pool_rate > 0.0 && self.max_pool_rate <= 1.0) {
            return bad("max_pool_rate must lie in (0, 1]");
        }
        if !(self.adam.learning_rate > 0.0 && self.loss_scale > 0.0) {
            return bad("learning rate and loss scale must be positive");
        }
        if !(0.0..1.0).contains(&self.adam.beta1) || !(0.0..1.0).contains(&self.adam.beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        Ok(())
    }

    /// Steps per epoch: `⌈videos / v⌉`.
    pub fn steps_per_epoch(&self, corpus_videos: usize) -> usize {
        corpus_videos.div_ceil(self.videos).max(1)
    }
}

/// RNG used for parameter initialization under `seed`.
pub fn init_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    rng
}

/// RNG used for minibatch sampling under `seed`.
pub fn batch_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

/// RNG used to pick gradient-check coordinates under `seed`.
pub fn probe_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    rng
}

struct PairTrace {
    video: GatedTrace,
    encoder: EncoderTrace,
    text: GatedTrace,
}

/// Forward state of one minibatch.
pub struct BatchForward {
    traces: Vec<PairTrace>,
    pub similarity: Matrix,
}

impl BatchForward {
    pub fn new(params: &ModelParameters, corpus: &Corpus, batch: &MiniBatch) -> Result<Self> {
        let mut traces = Vec::with_capacity(batch.len());
        for &pi in &batch.pairs {
            let pair = &corpus.pairs[pi];
            let video = gated_forward_traced(&pair.clip, &params.video)?;
            let encoder = encode_caption_traced(&pair.caption, &params.encoder)?;
            let text = gated_forward_traced(&encoder.output, &params.text)?;
            traces.push(PairTrace {
                video,
                encoder,
                text,
            });
        }
        let b = traces.len();
        let sim = Matrix::from_fn(b, b, |i, j| {
            similarity(&traces[i].video.output, &traces[j].text.output).value
        });
        Ok(Self {
            traces,
            similarity: sim,
        })
    }

    /// Accumulates parameter gradients given `∂L/∂S`.
    pub fn backward(
        &self,
        params: &ModelParameters,
        corpus: &Corpus,
        batch: &MiniBatch,
        d_sim: &Matrix,
        grads: &mut ModelParameters,
    ) -> Result<()> {
        let b = self.traces.len();
        let fv: Vec<&[f64]> = self.traces.iter().map(|t| t.video.output.as_slice()).collect();
        let gc: Vec<&[f64]> = self.traces.iter().map(|t| t.text.output.as_slice()).collect();
        let nf: Vec<f64> = fv.iter().map(|v| norm(v)).collect();
        let ng: Vec<f64> = gc.iter().map(|v| norm(v)).collect();
        let d = params.dims.embed_dim;
        let mut d_fv = vec![vec![0.0; d]; b];
        let mut d_gc = vec![vec![0.0; d]; b];
        // ∂s/∂a = (b̂ − s·â)/|a| and symmetrically for b
        for i in 0..b {
            for j in 0..b {
                let g = d_sim.get(i, j);
                if g == 0.0 || nf[i] < NORM_EPS || ng[j] < NORM_EPS {
                    continue;
                }
                let s = dot(fv[i], gc[j]) / (nf[i] * ng[j]);
                let ca = g / (nf[i] * ng[j]);
                let sa = g * s / (nf[i] * nf[i]);
                let cb = g / (nf[i] * ng[j]);
                let sb = g * s / (ng[j] * ng[j]);
                for k in 0..d {
                    d_fv[i][k] += ca * gc[j][k] - sa * fv[i][k];
                    d_gc[j][k] += cb * fv[i][k] - sb * gc[j][k];
                }
            }
        }
        let mut enc_grads = TextEncoderGrads {
            kernel: core::mem::replace(&mut grads.encoder.kernel, Matrix::zeros(0, 0)),
            bias: core::mem::take(&mut grads.encoder.bias),
        };
        for (i, &pi) in batch.pairs.iter().enumerate() {
            let pair = &corpus.pairs[pi];
            let tr = &self.traces[i];
            accumulate_gated_grads(&pair.clip, &params.video, &tr.video, &d_fv[i], &mut grads.video)?;
            let dc = accumulate_gated_grads(
                &tr.encoder.output,
                &params.text,
                &tr.text,
                &d_gc[i],
                &mut grads.text,
            )?;
            accumulate_encoder_grads(&pair.caption, &params.encoder, &tr.encoder, &dc, &mut enc_grads)?;
        }
        grads.encoder.kernel = enc_grads.kernel;
        grads.encoder.bias = enc_grads.bias;
        Ok(())
    }
}

/// Objective of one minibatch at fixed parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchObjective {
    /// Summed (unscaled) ranking loss.
    pub loss: f64,
    /// `∂(loss / loss_scale)/∂S`.
    pub d_sim: Matrix,
    pub active: usize,
    /// Whether each batch position was kept as a positive anchor.
    pub retained: Vec<bool>,
}

/// Positive max-pooling per video, negative weighting, then the ranking loss.
pub fn batch_objective(sim: &Matrix, batch: &MiniBatch, config: &BatchConfig) -> Result<BatchObjective> {
    let mut alpha = negative_weights(batch, config.p_intra)?;
    let mut retained = vec![true; batch.len()];
    if config.max_pool_rate < 1.0 {
        for s in 0..batch.videos {
            let range = batch.positions_of(s);
            let scores: Vec<f64> = range.clone().map(|i| sim.get(i, i)).collect();
            let keep = select_positive_pairs(&scores, config.max_pool_rate);
            for (local, i) in range.enumerate() {
                if keep.binary_search(&local).is_err() {
                    retained[i] = false;
                    alpha.row_mut(i).fill(0.0);
                }
            }
        }
    }
    let out = ranking_loss(sim, &alpha, config.margin)?;
    let mut d_sim = out.grad;
    if config.loss_scale != 1.0 {
        for g in d_sim.as_mut_slice() {
            *g /= config.loss_scale;
        }
    }
    Ok(BatchObjective {
        loss: out.loss,
        d_sim,
        active: out.active,
        retained,
    })
}

/// Loss of `batch` under `params`, without gradients.
pub fn batch_loss(
    params: &ModelParameters,
    corpus: &Corpus,
    batch: &MiniBatch,
    config: &BatchConfig,
) -> Result<f64> {
    let fwd = BatchForward::new(params, corpus, batch)?;
    Ok(batch_objective(&fwd.similarity, batch, config)?.loss)
}

/// Loss, objective details and full parameter gradient of one minibatch.
pub fn batch_gradients(
    params: &ModelParameters,
    corpus: &Corpus,
    batch: &MiniBatch,
    config: &BatchConfig,
) -> Result<(BatchObjective, ModelParameters)> {
    let fwd = BatchForward::new(params, corpus, batch)?;
    let obj = batch_objective(&fwd.similarity, batch, config)?;
    let mut grads = params.zeros_like();
    fwd.backward(params, corpus, batch, &obj.d_sim, &mut grads)?;
    Ok((obj, grads))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub step: u64,
    pub loss: f64,
    pub active_triplets: usize,
}

/// Owns the parameters, optimizer state and sampling RNG of a run.
pub struct Trainer {
    pub params: ModelParameters,
    pub state: OptimizerState,
    pub config: BatchConfig,
    rng: ChaCha8Rng,
}

impl Trainer {
    pub fn new(params: ModelParameters, config: BatchConfig) -> Result<Self> {
        config.validate()?;
        let state = OptimizerState::new(&params);
        Ok(Self {
            params,
            state,
            rng: batch_rng(config.seed),
            config,
        })
    }

    pub fn step(&mut self, corpus: &Corpus) -> Result<StepReport> {
        let batch = sample_minibatch(
            corpus,
            self.config.videos,
            self.config.pairs_per_video,
            &mut self.rng,
        )?;
        let (obj, grads) = batch_gradients(&self.params, corpus, &batch, &self.config)?;
        adam_step(&mut self.params, &grads, &mut self.state, &self.config.adam)?;
        Ok(StepReport {
            step: self.state.step,
            loss: obj.loss,
            active_triplets: obj.active,
        })
    }

    /// Runs `config.epochs` epochs, reporting every step to `on_step`.
    pub fn run(
        &mut self,
        corpus: &Corpus,
        mut on_step: impl FnMut(&StepReport),
    ) -> Result<()> {
        let steps = self.config.steps_per_epoch(corpus.videos.len());
        for _ in 0..self.config.epochs {
            for _ in 0..steps {
                let report = self.step(corpus)?;
                on_step(&report);
            }
        }
        Ok(())
    }
}
