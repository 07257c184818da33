//! Exact cosine top-k search over a corpus embedded with a frozen checkpoint.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use sha2::{Digest, Sha256};

use crate::dataset::WordEmbeddingTable;
use crate::error::{check_len, Error, Result};
use crate::gated::{ModelParameters, NORM_EPS};
use crate::matrix::norm;
use crate::text::{tokenize_and_filter, TokenSequence};

/// SHA-256 over every tensor's name, length and `f32` little-endian payload.
pub fn fingerprint(params: &ModelParameters) -> [u8; 32] {
    let mut h = Sha256::new();
    for (name, values) in params.tensors() {
        h.update((name.len() as u16).to_le_bytes());
        h.update(name.as_bytes());
        h.update((values.len() as u64).to_le_bytes());
        for &v in values {
            h.update((v as f32).to_le_bytes());
        }
    }
    h.finalize().into()
}

/// L2-normalized clip embeddings stored in `f32`, row-major `n × dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedCorpus {
    pub dim: usize,
    pub clip_ids: Vec<String>,
    pub rows: Vec<f32>,
    pub fingerprint: [u8; 32],
}

impl EmbeddedCorpus {
    pub fn len(&self) -> usize {
        self.clip_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clip_ids.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.rows[i * self.dim..(i + 1) * self.dim]
    }

    pub fn validate(&self) -> Result<()> {
        check_len("index payload", self.dim * self.clip_ids.len(), self.rows.len())?;
        let mut ids: Vec<&str> = self.clip_ids.iter().map(String::as_str).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Invalid("index clip ids are not unique".into()));
        }
        Ok(())
    }
}

/// Normalizes already-computed clip embeddings into an index.
pub fn index_from_embeddings(
    params: &ModelParameters,
    clips: impl IntoIterator<Item = (String, Vec<f64>)>,
) -> Result<EmbeddedCorpus> {
    let dim = params.dims.embed_dim;
    let mut clip_ids = Vec::new();
    let mut rows = Vec::new();
    for (id, emb) in clips {
        check_len("clip embedding", dim, emb.len())?;
        let n = norm(&emb);
        if n < NORM_EPS {
            return Err(Error::Invalid(alloc::format!("clip {id} embeds to a zero vector")));
        }
        rows.extend(emb.iter().map(|v| (v / n) as f32));
        clip_ids.push(id);
    }
    let index = EmbeddedCorpus {
        dim,
        clip_ids,
        rows,
        fingerprint: fingerprint(params),
    };
    index.validate()?;
    Ok(index)
}

/// Embeds every `(clip_id, feature)` with `f` and normalizes the rows.
pub fn build_index<'a>(
    params: &ModelParameters,
    clips: impl IntoIterator<Item = (&'a str, &'a [f64])>,
) -> Result<EmbeddedCorpus> {
    let embedded = clips
        .into_iter()
        .map(|(id, x)| Ok((String::from(id), params.embed_clip(x)?)))
        .collect::<Result<Vec<_>>>()?;
    index_from_embeddings(params, embedded)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hit {
    pub clip_id: String,
    pub score: f64,
}

/// Top `k` clips for an embedded caption, descending score, ties by clip id.
pub fn query(
    index: &EmbeddedCorpus,
    caption: &TokenSequence,
    k: usize,
    params: &ModelParameters,
) -> Result<Vec<Hit>> {
    if index.fingerprint != fingerprint(params) {
        return Err(Error::FingerprintMismatch);
    }
    if k == 0 {
        return Err(Error::Invalid("k must be at least 1".into()));
    }
    let q = params.embed_caption(caption)?;
    check_len("query embedding", index.dim, q.len())?;
    let n = norm(&q);
    let mut hits: Vec<Hit> = (0..index.len())
        .map(|i| {
            let score = if n < NORM_EPS {
                0.0
            } else {
                index
                    .row(i)
                    .iter()
                    .zip(&q)
                    .map(|(&r, &x)| r as f64 * x)
                    .sum::<f64>()
                    / n
            };
            Hit {
                clip_id: index.clip_ids[i].clone(),
                score,
            }
        })
        .collect();
    hits.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.clip_id.cmp(&b.clip_id))
    });
    hits.truncate(k);
    Ok(hits)
}

/// Tokenizes `text` with the checkpoint's token cap, then [`query`].
pub fn query_text(
    index: &EmbeddedCorpus,
    text: &str,
    table: &WordEmbeddingTable,
    k: usize,
    params: &ModelParameters,
) -> Result<Vec<Hit>> {
    let seq = tokenize_and_filter(text, table, params.dims.max_tokens)?;
    query(index, &seq, k, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gated::{similarity, Dims};
    use crate::matrix::Matrix;
    use crate::trainer::init_rng;
    use alloc::format;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dims() -> Dims {
        Dims {
            video_dim: 5,
            caption_dim: 4,
            embed_dim: 3,
            word_dim: 2,
            conv_width: 3,
            max_tokens: 30,
        }
    }

    fn corpus(n: usize, seed: u64) -> Vec<(String, Vec<f64>)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                (
                    format!("c{i:03}"),
                    (0..5).map(|_| rng.random_range(-1.0..1.0)).collect(),
                )
            })
            .collect()
    }

    fn caption() -> TokenSequence {
        TokenSequence {
            tokens: vec!["a".into(), "b".into()],
            embedded: Matrix::from_vec(2, 2, vec![0.7, -0.2, 0.1, 0.9]),
        }
    }

    #[test]
    fn empty_and_normalized() {
        let p = ModelParameters::init(dims(), &mut init_rng(0)).unwrap();
        let empty = build_index(&p, core::iter::empty()).unwrap();
        assert!(empty.is_empty());
        let data = corpus(20, 1);
        let idx = build_index(&p, data.iter().map(|(i, x)| (i.as_str(), x.as_slice()))).unwrap();
        for i in 0..idx.len() {
            let r: Vec<f64> = idx.row(i).iter().map(|&v| v as f64).collect();
            assert!((crate::matrix::dot(&r, &r) - 1.0).abs() < 1e-6);
        }
        let again = build_index(&p, data.iter().map(|(i, x)| (i.as_str(), x.as_slice()))).unwrap();
        assert_eq!(idx, again);
    }

    #[test]
    fn query_matches_brute_force() {
        let p = ModelParameters::init(dims(), &mut init_rng(2)).unwrap();
        let data = corpus(30, 3);
        let idx = build_index(&p, data.iter().map(|(i, x)| (i.as_str(), x.as_slice()))).unwrap();
        let g = p.embed_caption(&caption()).unwrap();
        let mut brute: Vec<(f64, &str)> = data
            .iter()
            .map(|(id, x)| (similarity(&p.embed_clip(x).unwrap(), &g).value, id.as_str()))
            .collect();
        brute.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(b.1)));
        for k in [1, 5, 30, 100] {
            let hits = query(&idx, &caption(), k, &p).unwrap();
            assert_eq!(hits.len(), k.min(30));
            for (h, b) in hits.iter().zip(&brute) {
                assert_eq!(h.clip_id, b.1);
                assert!((h.score - b.0).abs() < 1e-6);
            }
            assert!(hits.windows(2).all(|w| w[0].score >= w[1].score));
        }
    }

    #[test]
    fn fingerprint_guard() {
        let p = ModelParameters::init(dims(), &mut init_rng(2)).unwrap();
        let other = ModelParameters::init(dims(), &mut init_rng(3)).unwrap();
        let data = corpus(3, 3);
        let idx = build_index(&p, data.iter().map(|(i, x)| (i.as_str(), x.as_slice()))).unwrap();
        assert_eq!(
            query(&idx, &caption(), 1, &other).unwrap_err(),
            Error::FingerprintMismatch
        );
    }

    #[test]
    fn stopword_query_is_empty_caption() {
        let p = ModelParameters::init(dims(), &mut init_rng(2)).unwrap();
        let idx = build_index(&p, core::iter::empty()).unwrap();
        let mut table = WordEmbeddingTable::new(2).unwrap();
        table.insert("the".into(), vec![1.0, 0.0]).unwrap();
        table.add_stopword("the");
        assert_eq!(
            query_text(&idx, "the THE", &table, 3, &p).unwrap_err(),
            Error::EmptyCaption
        );
    }
}
