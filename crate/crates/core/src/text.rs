//! Caption tokenization and the shallow convolutional caption encoder.
//!
//! A caption is lowercased, split on non-alphanumeric runs, stripped of
//! stop-words and out-of-vocabulary tokens, and embedded with frozen word
//! vectors. The encoder runs one zero-padded 1D convolution (odd width,
//! stride 1) over the token axis, adds a bias, applies ReLU and max-pools over
//! positions.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::WordEmbeddingTable;
use crate::error::{check_len, Error, Result};
use crate::matrix::Matrix;

/// Version tag of [`DEFAULT_STOPWORDS`]; bump whenever the list changes.
pub const STOPWORDS_VERSION: u32 = 1;

/// Bundled English stop-word list.
pub const DEFAULT_STOPWORDS: &[&str] = &[
    "a", "about", "above", "after", "again", "against", "all", "am", "an", "and", "any", "are",
    "as", "at", "be", "because", "been", "before", "being", "below", "between", "both", "but",
    "by", "can", "could", "did", "do", "does", "doing", "down", "during", "each", "few", "for",
    "from", "further", "had", "has", "have", "having", "he", "her", "here", "hers", "herself",
    "him", "himself", "his", "how", "i", "if", "in", "into", "is", "it", "its", "itself", "just",
    "me", "more", "most", "my", "myself", "no", "nor", "not", "now", "of", "off", "on", "once",
    "only", "or", "other", "our", "ours", "ourselves", "out", "over", "own", "same", "she",
    "should", "so", "some", "such", "than", "that", "the", "their", "theirs", "them",
    "themselves", "then", "there", "these", "they", "this", "those", "through", "to", "too",
    "under", "until", "up", "very", "was", "we", "were", "what", "when", "where", "which",
    "while", "who", "whom", "why", "will", "with", "would", "you", "your", "yours", "yourself",
    "yourselves",
];

pub const DEFAULT_MAX_TOKENS: usize = 30;
pub const DEFAULT_WIDTH: usize = 3;

/// Filtered caption tokens and their embedding rows (`T × d_w`).
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
    pub embedded: Matrix,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Lowercases, splits on non-alphanumeric runs, removes stop-words and tokens
/// missing from `table`, then truncates to `max_len` tokens.
pub fn tokenize_and_filter(
    text: &str,
    table: &WordEmbeddingTable,
    max_len: usize,
) -> Result<TokenSequence> {
    let lower = text.to_lowercase();
    let mut tokens = Vec::new();
    let mut rows: Vec<f64> = Vec::new();
    for word in lower.split(|c: char| !c.is_alphanumeric()) {
        if tokens.len() >= max_len {
            break;
        }
        if word.is_empty() || table.is_stopword(word) {
            continue;
        }
        if let Some(v) = table.get(word) {
            tokens.push(String::from(word));
            rows.extend_from_slice(v);
        }
    }
    if tokens.is_empty() {
        return Err(Error::EmptyCaption);
    }
    let embedded = Matrix::from_vec(tokens.len(), table.dim(), rows);
    Ok(TokenSequence { tokens, embedded })
}

/// Convolution kernel and bias of the caption encoder.
///
/// `kernel` is `(width·d_w) × d_c`; row `u·d_w + i` holds the weights from
/// input channel `i` at window offset `u` to every output channel.
#[derive(Debug, Clone, PartialEq)]
pub struct TextEncoderParams {
    pub width: usize,
    pub word_dim: usize,
    pub out_dim: usize,
    pub max_tokens: usize,
    pub kernel: Matrix,
    pub bias: Vec<f64>,
}

impl TextEncoderParams {
    pub fn zeros(width: usize, word_dim: usize, out_dim: usize, max_tokens: usize) -> Result<Self> {
        if width == 0 || width.is_multiple_of(2) {
            return Err(Error::Invalid(alloc::format!(
                "convolution width must be odd and positive, got {width}"
            )));
        }
        Ok(Self {
            width,
            word_dim,
            out_dim,
            max_tokens,
            kernel: Matrix::zeros(width * word_dim, out_dim),
            bias: vec![0.0; out_dim],
        })
    }

    pub fn parameter_count(&self) -> usize {
        self.kernel.as_slice().len() + self.bias.len()
    }

    fn half(&self) -> usize {
        (self.width - 1) / 2
    }
}

/// Intermediates of [`encode_caption_traced`] needed by the backward pass.
#[derive(Debug, Clone)]
pub struct EncoderTrace {
    /// Pre-activation convolution output, `T × d_c`.
    pub pre: Matrix,
    /// Position selected by the max-pool for each output channel.
    pub argmax: Vec<usize>,
    pub output: Vec<f64>,
}

/// Gradients of the encoder parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TextEncoderGrads {
    pub kernel: Matrix,
    pub bias: Vec<f64>,
}

impl TextEncoderGrads {
    pub fn zeros_like(params: &TextEncoderParams) -> Self {
        Self {
            kernel: Matrix::zeros(params.kernel.rows(), params.kernel.cols()),
            bias: vec![0.0; params.bias.len()],
        }
    }
}

pub fn encode_caption(seq: &TokenSequence, params: &TextEncoderParams) -> Result<Vec<f64>> {
    encode_caption_traced(seq, params).map(|t| t.output)
}

pub fn encode_caption_traced(
    seq: &TokenSequence,
    params: &TextEncoderParams,
) -> Result<EncoderTrace> {
    check_len("caption word dim", params.word_dim, seq.embedded.cols())?;
    let t_len = seq.embedded.rows();
    if t_len == 0 {
        return Err(Error::EmptyCaption);
    }
    let half = params.half();
    let d_w = params.word_dim;
    let mut pre = Matrix::zeros(t_len, params.out_dim);
    for t in 0..t_len {
        let out = pre.row_mut(t);
        out.copy_from_slice(&params.bias);
        for u in 0..params.width {
            let Some(src) = (t + u).checked_sub(half).filter(|&s| s < t_len) else {
                continue;
            };
            let x = seq.embedded.row(src);
            for (i, &xi) in x.iter().enumerate() {
                if xi == 0.0 {
                    continue;
                }
                let w = params.kernel.row(u * d_w + i);
                for (o, &wk) in out.iter_mut().zip(w) {
                    *o += xi * wk;
                }
            }
        }
    }
    let mut argmax = vec![0usize; params.out_dim];
    let mut output = vec![0.0; params.out_dim];
    for o in 0..params.out_dim {
        let mut best = relu(pre.get(0, o));
        let mut best_t = 0;
        for t in 1..t_len {
            let v = relu(pre.get(t, o));
            if v > best {
                best = v;
                best_t = t;
            }
        }
        argmax[o] = best_t;
        output[o] = best;
    }
    Ok(EncoderTrace {
        pre,
        argmax,
        output,
    })
}

#[inline]
fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Adds the gradient of `⟨upstream, c⟩` into `grads`. The max-pool routes each
/// channel's gradient to its argmax position only.
pub fn accumulate_encoder_grads(
    seq: &TokenSequence,
    params: &TextEncoderParams,
    trace: &EncoderTrace,
    upstream: &[f64],
    grads: &mut TextEncoderGrads,
) -> Result<()> {
    check_len("encoder upstream", params.out_dim, upstream.len())?;
    check_len("encoder kernel grad rows", params.kernel.rows(), grads.kernel.rows())?;
    let half = params.half();
    let t_len = seq.embedded.rows();
    let d_w = params.word_dim;
    for (o, &g) in upstream.iter().enumerate() {
        let t = trace.argmax[o];
        if g == 0.0 || trace.pre.get(t, o) <= 0.0 {
            continue;
        }
        grads.bias[o] += g;
        for u in 0..params.width {
            let Some(src) = (t + u).checked_sub(half).filter(|&s| s < t_len) else {
                continue;
            };
            for (i, &xi) in seq.embedded.row(src).iter().enumerate() {
                let r = u * d_w + i;
                let cur = grads.kernel.get(r, o);
                grads.kernel.set(r, o, cur + g * xi);
            }
        }
    }
    Ok(())
}

/// Gradients of `⟨upstream, encode_caption(seq)⟩` with respect to kernel and bias.
pub fn encode_caption_backward(
    seq: &TokenSequence,
    params: &TextEncoderParams,
    upstream: &[f64],
) -> Result<TextEncoderGrads> {
    let trace = encode_caption_traced(seq, params)?;
    let mut grads = TextEncoderGrads::zeros_like(params);
    accumulate_encoder_grads(seq, params, &trace, upstream, &mut grads)?;
    Ok(grads)
}
