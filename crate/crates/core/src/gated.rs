//! Gated embedding units, cosine similarity and the full model parameter set.
//!
//! Each branch maps its input `x` to `h ∘ σ(W2·h + b2)` with `h = W1·x + b1`.
//! The caption branch is fed by the convolutional text encoder.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{check_len, Error, Result};
use crate::matrix::{dot, norm, round_to_f32, Matrix};
use crate::text::{encode_caption, TextEncoderParams, TokenSequence};

/// Norms below this make a similarity degenerate (reported as 0).
pub const NORM_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct GatedUnitParams {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

impl GatedUnitParams {
    pub fn zeros(input_dim: usize, out_dim: usize) -> Self {
        Self {
            w1: Matrix::zeros(out_dim, input_dim),
            b1: vec![0.0; out_dim],
            w2: Matrix::zeros(out_dim, out_dim),
            b2: vec![0.0; out_dim],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn parameter_count(&self) -> usize {
        gated_unit_size(self.input_dim(), self.out_dim())
    }
}

pub const fn gated_unit_size(input_dim: usize, out_dim: usize) -> usize {
    out_dim * input_dim + out_dim + out_dim * out_dim + out_dim
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// Forward intermediates of a gated unit.
#[derive(Debug, Clone)]
pub struct GatedTrace {
    pub h: Vec<f64>,
    pub gate: Vec<f64>,
    pub output: Vec<f64>,
}

pub fn gated_forward(x: &[f64], unit: &GatedUnitParams) -> Result<Vec<f64>> {
    gated_forward_traced(x, unit).map(|t| t.output)
}

pub fn gated_forward_traced(x: &[f64], unit: &GatedUnitParams) -> Result<GatedTrace> {
    check_len("gated unit input", unit.input_dim(), x.len())?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("gated unit input".into()));
    }
    let mut h = unit.w1.matvec(x);
    for (hi, bi) in h.iter_mut().zip(&unit.b1) {
        *hi += bi;
    }
    let z = unit.w2.matvec(&h);
    let gate: Vec<f64> = z.iter().zip(&unit.b2).map(|(z, b)| sigmoid(z + b)).collect();
    let output = h.iter().zip(&gate).map(|(h, g)| h * g).collect();
    Ok(GatedTrace { h, gate, output })
}

/// Adds the gradient of `⟨upstream, f(x)⟩` into `grads` and returns `∂/∂x`.
pub fn accumulate_gated_grads(
    x: &[f64],
    unit: &GatedUnitParams,
    trace: &GatedTrace,
    upstream: &[f64],
    grads: &mut GatedUnitParams,
) -> Result<Vec<f64>> {
    check_len("gated unit upstream", unit.out_dim(), upstream.len())?;
    check_len("gated unit input", unit.input_dim(), x.len())?;
    let dz: Vec<f64> = upstream
        .iter()
        .zip(&trace.h)
        .zip(&trace.gate)
        .map(|((u, h), g)| u * h * g * (1.0 - g))
        .collect();
    let mut dh = unit.w2.matvec_t(&dz);
    for ((d, u), g) in dh.iter_mut().zip(upstream).zip(&trace.gate) {
        *d += u * g;
    }
    for (gb, d) in grads.b2.iter_mut().zip(&dz) {
        *gb += d;
    }
    grads.w2.add_outer(1.0, &dz, &trace.h);
    for (gb, d) in grads.b1.iter_mut().zip(&dh) {
        *gb += d;
    }
    grads.w1.add_outer(1.0, &dh, x);
    Ok(unit.w1.matvec_t(&dh))
}

/// Parameter gradients and input gradient of `⟨upstream, f(x)⟩`.
pub fn gated_backward(
    x: &[f64],
    unit: &GatedUnitParams,
    upstream: &[f64],
) -> Result<(GatedUnitParams, Vec<f64>)> {
    let trace = gated_forward_traced(x, unit)?;
    let mut grads = GatedUnitParams::zeros(unit.input_dim(), unit.out_dim());
    let dx = accumulate_gated_grads(x, unit, &trace, upstream, &mut grads)?;
    Ok((grads, dx))
}

/// Cosine similarity with a flag for the degenerate (near-zero norm) case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub value: f64,
    pub degenerate: bool,
}

pub fn similarity(a: &[f64], b: &[f64]) -> Similarity {
    let na = norm(a);
    let nb = norm(b);
    if na < NORM_EPS || nb < NORM_EPS {
        return Similarity {
            value: 0.0,
            degenerate: true,
        };
    }
    Similarity {
        value: dot(a, b) / (na * nb),
        degenerate: false,
    }
}

/// Named scale presets for the model dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Paper,
    Desk,
}

impl Preset {
    pub fn dims(self, word_dim: usize) -> Dims {
        match self {
            Preset::Paper => Dims {
                video_dim: 4096,
                caption_dim: 4096,
                embed_dim: 4096,
                word_dim,
                conv_width: crate::text::DEFAULT_WIDTH,
                max_tokens: crate::text::DEFAULT_MAX_TOKENS,
            },
            Preset::Desk => Dims {
                video_dim: 64,
                caption_dim: 64,
                embed_dim: 32,
                word_dim,
                conv_width: crate::text::DEFAULT_WIDTH,
                max_tokens: crate::text::DEFAULT_MAX_TOKENS,
            },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::Paper => "paper",
            Preset::Desk => "desk",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "paper" => Some(Preset::Paper),
            "desk" => Some(Preset::Desk),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub video_dim: usize,
    pub caption_dim: usize,
    pub embed_dim: usize,
    pub word_dim: usize,
    pub conv_width: usize,
    pub max_tokens: usize,
}

impl Dims {
    /// Parameters of the two gated units.
    pub fn gated_parameter_count(&self) -> usize {
        gated_unit_size(self.video_dim, self.embed_dim)
            + gated_unit_size(self.caption_dim, self.embed_dim)
    }

    pub fn encoder_parameter_count(&self) -> usize {
        self.conv_width * self.word_dim * self.caption_dim + self.caption_dim
    }

    pub fn parameter_count(&self) -> usize {
        self.gated_parameter_count() + self.encoder_parameter_count()
    }

    /// `(name, shape)` of every trainable tensor, in checkpoint order.
    pub fn tensor_shapes(&self) -> [(&'static str, [usize; 2]); 10] {
        let d = self.embed_dim;
        [
            ("video.w1", [d, self.video_dim]),
            ("video.b1", [d, 1]),
            ("video.w2", [d, d]),
            ("video.b2", [d, 1]),
            ("text.w1", [d, self.caption_dim]),
            ("text.b1", [d, 1]),
            ("text.w2", [d, d]),
            ("text.b2", [d, 1]),
            ("encoder.kernel", [self.conv_width * self.word_dim, self.caption_dim]),
            ("encoder.bias", [self.caption_dim, 1]),
        ]
    }
}

/// All trainable tensors. Gradients and optimizer moments reuse this layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    pub dims: Dims,
    pub video: GatedUnitParams,
    pub text: GatedUnitParams,
    pub encoder: TextEncoderParams,
}

impl ModelParameters {
    pub fn zeros(dims: Dims) -> Result<Self> {
        Ok(Self {
            dims,
            video: GatedUnitParams::zeros(dims.video_dim, dims.embed_dim),
            text: GatedUnitParams::zeros(dims.caption_dim, dims.embed_dim),
            encoder: TextEncoderParams::zeros(
                dims.conv_width,
                dims.word_dim,
                dims.caption_dim,
                dims.max_tokens,
            )?,
        })
    }

    /// Weights uniform in `±1/√fan_in` per tensor, biases zero, values rounded
    /// to `f32` so checkpoints round-trip exactly.
    pub fn init<R: Rng + ?Sized>(dims: Dims, rng: &mut R) -> Result<Self> {
        let mut p = Self::zeros(dims)?;
        fill_uniform(p.video.w1.as_mut_slice(), dims.video_dim, rng);
        fill_uniform(p.video.w2.as_mut_slice(), dims.embed_dim, rng);
        fill_uniform(p.text.w1.as_mut_slice(), dims.caption_dim, rng);
        fill_uniform(p.text.w2.as_mut_slice(), dims.embed_dim, rng);
        fill_uniform(
            p.encoder.kernel.as_mut_slice(),
            dims.conv_width * dims.word_dim,
            rng,
        );
        Ok(p)
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.dims).expect("dims of a valid model")
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn tensors(&self) -> [(&'static str, &[f64]); 10] {
        [
            ("video.w1", self.video.w1.as_slice()),
            ("video.b1", &self.video.b1),
            ("video.w2", self.video.w2.as_slice()),
            ("video.b2", &self.video.b2),
            ("text.w1", self.text.w1.as_slice()),
            ("text.b1", &self.text.b1),
            ("text.w2", self.text.w2.as_slice()),
            ("text.b2", &self.text.b2),
            ("encoder.kernel", self.encoder.kernel.as_slice()),
            ("encoder.bias", &self.encoder.bias),
        ]
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut [f64]); 10] {
        [
            ("video.w1", self.video.w1.as_mut_slice()),
            ("video.b1", &mut self.video.b1),
            ("video.w2", self.video.w2.as_mut_slice()),
            ("video.b2", &mut self.video.b2),
            ("text.w1", self.text.w1.as_mut_slice()),
            ("text.b1", &mut self.text.b1),
            ("text.w2", self.text.w2.as_mut_slice()),
            ("text.b2", &mut self.text.b2),
            ("encoder.kernel", self.encoder.kernel.as_mut_slice()),
            ("encoder.bias", &mut self.encoder.bias),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    /// `f(v)`.
    pub fn embed_clip(&self, clip: &[f64]) -> Result<Vec<f64>> {
        gated_forward(clip, &self.video)
    }

    /// `g(c)` with `c` the encoded caption.
    pub fn embed_caption(&self, caption: &TokenSequence) -> Result<Vec<f64>> {
        let c = encode_caption(caption, &self.encoder)?;
        gated_forward(&c, &self.text)
    }
}

fn fill_uniform<R: Rng + ?Sized>(values: &mut [f64], fan_in: usize, rng: &mut R) {
    let bound = 1.0 / libm::sqrt(fan_in.max(1) as f64);
    for v in values.iter_mut() {
        *v = rng.random_range(-bound..bound);
    }
    round_to_f32(values);
}

/// `S[i][j] = s(f(v_i), g(c_j))`: rows are clips, columns captions.
pub fn similarity_matrix(
    clips: &[Vec<f64>],
    captions: &[TokenSequence],
    params: &ModelParameters,
) -> Result<Matrix> {
    let fv = clips
        .iter()
        .map(|c| params.embed_clip(c))
        .collect::<Result<Vec<_>>>()?;
    let gc = captions
        .iter()
        .map(|c| params.embed_caption(c))
        .collect::<Result<Vec<_>>>()?;
    Ok(Matrix::from_fn(fv.len(), gc.len(), |i, j| {
        similarity(&fv[i], &gc[j]).value
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_unit(rng: &mut ChaCha8Rng, d_in: usize, d: usize) -> GatedUnitParams {
        let mut u = GatedUnitParams::zeros(d_in, d);
        for v in u.w1.as_mut_slice().iter_mut().chain(u.w2.as_mut_slice()) {
            *v = rng.random_range(-1.0..1.0);
        }
        for v in u.b1.iter_mut().chain(u.b2.iter_mut()) {
            *v = rng.random_range(-0.5..0.5);
        }
        u
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    /// Plain scalar loops, no shared helpers.
    fn forward_oracle(x: &[f64], u: &GatedUnitParams) -> Vec<f64> {
        let d = u.out_dim();
        let mut h = vec![0.0; d];
        for r in 0..d {
            let mut acc = 0.0;
            for c in 0..x.len() {
                acc += u.w1.get(r, c) * x[c];
            }
            h[r] = acc + u.b1[r];
        }
        let mut out = vec![0.0; d];
        for r in 0..d {
            let mut z = 0.0;
            for c in 0..d {
                z += u.w2.get(r, c) * h[c];
            }
            z += u.b2[r];
            out[r] = h[r] / (1.0 + libm::exp(-z));
        }
        out
    }

    #[test]
    fn half_gate_identity() {
        let mut u = GatedUnitParams::zeros(2, 2);
        u.w1 = Matrix::identity(2);
        assert_eq!(gated_forward(&[2.0, 4.0], &u).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn saturated_gate_passes_linear_part() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut u = random_unit(&mut rng, 4, 3);
        u.w2 = Matrix::zeros(3, 3);
        u.b2 = vec![30.0; 3];
        let x = random_vec(&mut rng, 4);
        let out = gated_forward(&x, &u).unwrap();
        let lin = gated_forward_traced(&x, &u).unwrap().h;
        for (o, l) in out.iter().zip(&lin) {
            assert!((o - l).abs() <= 1e-9);
        }
    }

    #[test]
    fn forward_matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let u = random_unit(&mut rng, 5, 3);
            let x = random_vec(&mut rng, 5);
            let got = gated_forward(&x, &u).unwrap();
            let want = forward_oracle(&x, &u);
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() <= 1e-12);
            }
            let h = gated_forward_traced(&x, &u).unwrap().h;
            for (g, hi) in got.iter().zip(&h) {
                assert!(g.abs() <= hi.abs());
            }
        }
    }

    #[test]
    fn forward_rejects_bad_input() {
        let u = GatedUnitParams::zeros(3, 2);
        assert!(matches!(gated_forward(&[1.0], &u), Err(Error::Shape { .. })));
        assert!(matches!(
            gated_forward(&[1.0, f64::NAN, 0.0], &u),
            Err(Error::NonFinite(_))
        ));
    }

    #[test]
    fn backward_zero_upstream() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let u = random_unit(&mut rng, 4, 3);
        let x = random_vec(&mut rng, 4);
        let (g, dx) = gated_backward(&x, &u, &[0.0; 3]).unwrap();
        assert_eq!(g, GatedUnitParams::zeros(4, 3));
        assert!(dx.iter().all(|&v| v == 0.0));
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
    }

    fn check_fd(u: &mut GatedUnitParams, x: &mut [f64], up: &[f64]) {
        let h = 1e-5;
        let (grads, dx) = gated_backward(x, u, up).unwrap();
        let obj = |u: &GatedUnitParams, x: &[f64]| dot(&gated_forward(x, u).unwrap(), up);
        macro_rules! fd_slice {
            ($slice:expr, $grad:expr) => {
                for k in 0..$grad.len() {
                    let orig = $slice[k];
                    $slice[k] = orig + h;
                    let p = obj(u, x);
                    $slice[k] = orig - h;
                    let m = obj(u, x);
                    $slice[k] = orig;
                    let fd = (p - m) / (2.0 * h);
                    assert!(rel_err($grad[k], fd) < 1e-6, "{} vs {}", $grad[k], fd);
                }
            };
        }
        fd_slice!(u.w1.as_mut_slice(), grads.w1.as_slice());
        fd_slice!(u.b1, grads.b1);
        fd_slice!(u.w2.as_mut_slice(), grads.w2.as_slice());
        fd_slice!(u.b2, grads.b2);
        fd_slice!(x, dx);
    }

    #[test]
    fn backward_matches_fd_with_zero_gate_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut u = random_unit(&mut rng, 4, 3);
        u.w2 = Matrix::zeros(3, 3);
        u.b2 = vec![0.0; 3];
        let mut x = random_vec(&mut rng, 4);
        let up = random_vec(&mut rng, 3);
        check_fd(&mut u, &mut x, &up);
        // with a constant half gate the w1 gradient is 0.5 · upstream ⊗ x
        let (g, _) = gated_backward(&x, &u, &up).unwrap();
        for r in 0..3 {
            for c in 0..4 {
                assert!((g.w1.get(r, c) - 0.5 * up[r] * x[c]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn backward_matches_fd_at_random_points() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
            let mut u = random_unit(&mut rng, 5, 3);
            let mut x = random_vec(&mut rng, 5);
            let up = random_vec(&mut rng, 3);
            check_fd(&mut u, &mut x, &up);
        }
    }

    #[test]
    fn similarity_examples() {
        assert_eq!(similarity(&[3.0, 4.0], &[3.0, 4.0]).value, 1.0);
        assert_eq!(similarity(&[1.0, 0.0], &[0.0, 1.0]).value, 0.0);
        let a = [0.3, -1.2, 2.0];
        let b = [1.0, 0.5, -0.25];
        let scaled: Vec<f64> = a.iter().map(|v| 7.3 * v).collect();
        assert!((similarity(&scaled, &b).value - similarity(&a, &b).value).abs() < 1e-15);
        let zero = similarity(&[0.0, 0.0], &[1.0, 0.0]);
        assert!(zero.degenerate);
        assert_eq!(zero.value, 0.0);
    }

    #[test]
    fn paper_preset_gated_count() {
        assert_eq!(Preset::Paper.dims(300).gated_parameter_count(), 67_125_248);
    }

    #[test]
    fn counts_match_tensors() {
        let dims = Preset::Desk.dims(16);
        let p = ModelParameters::zeros(dims).unwrap();
        assert_eq!(p.parameter_count(), dims.parameter_count());
        let shapes = dims.tensor_shapes();
        for ((name, t), (sname, shape)) in p.tensors().iter().zip(shapes.iter()) {
            assert_eq!(name, sname);
            assert_eq!(t.len(), shape[0] * shape[1]);
        }
    }

    #[test]
    fn init_is_bounded_and_f32_exact() {
        let dims = Preset::Desk.dims(16);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = ModelParameters::init(dims, &mut rng).unwrap();
        let bound = 1.0 / libm::sqrt(64.0);
        assert!(p.video.w1.as_slice().iter().all(|v| v.abs() <= bound));
        assert!(p.video.b1.iter().all(|&v| v == 0.0));
        for (_, t) in p.tensors() {
            assert!(t.iter().all(|&v| v as f32 as f64 == v));
        }
    }

    fn random_caption(rng: &mut ChaCha8Rng, t: usize, d_w: usize) -> TokenSequence {
        TokenSequence {
            tokens: (0..t).map(|i| alloc::format!("t{i}")).collect(),
            embedded: Matrix::from_fn(t, d_w, |_, _| rng.random_range(-1.0..1.0)),
        }
    }

    #[test]
    fn similarity_matrix_matches_per_pair() {
        let dims = Dims {
            video_dim: 6,
            caption_dim: 5,
            embed_dim: 4,
            word_dim: 3,
            conv_width: 3,
            max_tokens: 30,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = ModelParameters::init(dims, &mut rng).unwrap();
        let clips: Vec<Vec<f64>> = (0..2).map(|_| random_vec(&mut rng, 6)).collect();
        let caps: Vec<TokenSequence> = (0..2).map(|_| random_caption(&mut rng, 3, 3)).collect();
        let s = similarity_matrix(&clips, &caps, &p).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let fv = p.embed_clip(&clips[i]).unwrap();
                let gc = p.embed_caption(&caps[j]).unwrap();
                assert_eq!(s.get(i, j), similarity(&fv, &gc).value);
                assert!(s.get(i, j).abs() <= 1.0 + 1e-12);
            }
        }
        let single = similarity_matrix(&clips[..1], &caps[..1], &p).unwrap();
        assert_eq!(single.get(0, 0), s.get(0, 0));

        let dup_clips = alloc::vec![clips[0].clone(), clips[0].clone()];
        let dup_caps = alloc::vec![caps[0].clone(), caps[0].clone()];
        let d = similarity_matrix(&dup_clips, &dup_caps, &p).unwrap();
        assert_eq!(d.row(0), d.row(1));
        assert_eq!(d.get(0, 0), d.get(0, 1));
        assert_eq!(d.get(1, 0), d.get(1, 1));
    }
}
