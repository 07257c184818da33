//! Adam with bias correction over every tensor of [`ModelParameters`].

use alloc::string::ToString;

use crate::error::{Error, Result};
use crate::gated::ModelParameters;
use crate::matrix::round_to_f32;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub first: ModelParameters,
    pub second: ModelParameters,
    pub step: u64,
}

impl OptimizerState {
    pub fn new(params: &ModelParameters) -> Self {
        Self {
            first: params.zeros_like(),
            second: params.zeros_like(),
            step: 0,
        }
    }
}

/// One Adam update. Parameters and moments are rounded to `f32` afterwards,
/// matching checkpoint storage.
pub fn adam_step(
    params: &mut ModelParameters,
    grads: &ModelParameters,
    state: &mut OptimizerState,
    hyper: &AdamConfig,
) -> Result<()> {
    if params.dims != grads.dims || params.dims != state.first.dims {
        return Err(Error::Invalid("optimizer shapes do not match parameters".into()));
    }
    for (name, g) in grads.tensors() {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(name.to_string()));
        }
    }
    state.step += 1;
    let t = state.step as f64;
    let c1 = 1.0 - libm::pow(hyper.beta1, t);
    let c2 = 1.0 - libm::pow(hyper.beta2, t);
    let grads = grads.tensors();
    let firsts = state.first.tensors_mut();
    let seconds = state.second.tensors_mut();
    let params = params.tensors_mut();
    for (((p, g), m), v) in params.into_iter().zip(grads).zip(firsts).zip(seconds) {
        let (p, g, m, v) = (p.1, g.1, m.1, v.1);
        for i in 0..p.len() {
            m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g[i];
            v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= hyper.learning_rate * m_hat / (libm::sqrt(v_hat) + hyper.eps);
        }
        round_to_f32(p);
        round_to_f32(m);
        round_to_f32(v);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gated::Dims;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dims() -> Dims {
        Dims {
            video_dim: 3,
            caption_dim: 2,
            embed_dim: 2,
            word_dim: 2,
            conv_width: 1,
            max_tokens: 30,
        }
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut p = ModelParameters::init(dims(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let before = p.clone();
        let g = p.zeros_like();
        let mut st = OptimizerState::new(&p);
        adam_step(&mut p, &g, &mut st, &AdamConfig::default()).unwrap();
        assert_eq!(p, before);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn first_step_closed_form() {
        let mut p = ModelParameters::zeros(dims()).unwrap();
        let mut g = p.zeros_like();
        g.video.b1[0] = 1.0;
        let mut st = OptimizerState::new(&p);
        adam_step(&mut p, &g, &mut st, &AdamConfig::default()).unwrap();
        let want = -1e-4 / (1.0 + 1e-8);
        assert!((p.video.b1[0] - want).abs() < 1e-11, "{}", p.video.b1[0]);
        assert!((p.video.b1[0] + 9.99999e-5).abs() < 1e-9);
        assert_eq!(p.video.b1[1], 0.0);
    }

    #[test]
    fn non_finite_gradient_names_tensor() {
        let mut p = ModelParameters::zeros(dims()).unwrap();
        let mut g = p.zeros_like();
        g.text.w2.set(0, 1, f64::NAN);
        let mut st = OptimizerState::new(&p);
        let err = adam_step(&mut p, &g, &mut st, &AdamConfig::default()).unwrap_err();
        assert_eq!(err, Error::NonFinite("text.w2".into()));
        assert_eq!(st.step, 0);
    }
}
