//! End-to-end comparison of analytic gradients against central differences.

use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;

use super::{batch_gradients, batch_loss, BatchConfig, MiniBatch};
use crate::dataset::Corpus;
use crate::error::Result;
use crate::gated::ModelParameters;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    /// Total coordinates sampled, spread evenly over all tensors.
    pub coordinates: usize,
    pub step: f64,
    pub tolerance: f64,
    /// Denominator floor of the relative error, for near-zero gradients.
    pub floor: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            coordinates: 200,
            step: 1e-5,
            tolerance: 1e-4,
            floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorCheck {
    pub name: &'static str,
    pub checked: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorCheck>,
    pub max_rel_error: f64,
    pub worst_tensor: &'static str,
    pub checked: usize,
    pub passed: bool,
}

impl GradCheckReport {
    /// Tensors whose worst coordinate exceeds the tolerance.
    pub fn failing(&self, tolerance: f64) -> impl Iterator<Item = &'static str> + '_ {
        self.tensors
            .iter()
            .filter(move |t| t.max_rel_error >= tolerance)
            .map(|t| t.name)
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Analytic gradient of the batch loss versus central differences at sampled coordinates.
pub fn gradient_check<R: Rng + ?Sized>(
    params: &ModelParameters,
    corpus: &Corpus,
    batch: &MiniBatch,
    config: &BatchConfig,
    options: &GradCheckOptions,
    rng: &mut R,
) -> Result<GradCheckReport> {
    let (_, analytic) = batch_gradients(params, corpus, batch, config)?;
    compare_gradients(params, &analytic, corpus, batch, config, options, rng)
}

/// Compares a supplied analytic gradient against central differences.
pub fn compare_gradients<R: Rng + ?Sized>(
    params: &ModelParameters,
    analytic: &ModelParameters,
    corpus: &Corpus,
    batch: &MiniBatch,
    config: &BatchConfig,
    options: &GradCheckOptions,
    rng: &mut R,
) -> Result<GradCheckReport> {
    let tensor_count = params.tensors().len();
    let per_tensor = options.coordinates.div_ceil(tensor_count);
    let mut probe = params.clone();
    let analytic = analytic.tensors();
    let mut tensors = Vec::with_capacity(tensor_count);
    let h = options.step;
    let scale = config.loss_scale;
    for (t, (name, grad)) in analytic.iter().enumerate() {
        let len = grad.len();
        let picks = index::sample(rng, len, per_tensor.min(len));
        let mut worst: f64 = 0.0;
        for k in picks.iter() {
            let orig = probe.tensors()[t].1[k];
            probe.tensors_mut()[t].1[k] = orig + h;
            let plus = batch_loss(&probe, corpus, batch, config)?;
            probe.tensors_mut()[t].1[k] = orig - h;
            let minus = batch_loss(&probe, corpus, batch, config)?;
            probe.tensors_mut()[t].1[k] = orig;
            let numeric = (plus - minus) / (2.0 * h) / scale;
            worst = worst.max(relative_error(grad[k], numeric, options.floor));
        }
        tensors.push(TensorCheck {
            name,
            checked: picks.len(),
            max_rel_error: worst,
        });
    }
    let (worst_tensor, max_rel_error) = tensors
        .iter()
        .map(|t| (t.name, t.max_rel_error))
        .fold(("", 0.0), |acc, x| if x.1 > acc.1 || acc.0.is_empty() { x } else { acc });
    Ok(GradCheckReport {
        checked: tensors.iter().map(|t| t.checked).sum(),
        passed: max_rel_error < options.tolerance,
        max_rel_error,
        worst_tensor,
        tensors,
    })
}
