//! Minibatch assembly and intra/inter-video negative weighting.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng;

use crate::dataset::Corpus;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// `b = v·k` pairs: `v` distinct videos, `k` pairs drawn with replacement from each.
#[derive(Debug, Clone, PartialEq)]
pub struct MiniBatch {
    /// Corpus pair index of every batch position, grouped by video.
    pub pairs: Vec<usize>,
    /// Batch-local video slot (`0..v`) of every position.
    pub slot: Vec<usize>,
    pub videos: usize,
    pub per_video: usize,
}

impl MiniBatch {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    #[inline]
    pub fn same_video(&self, i: usize, j: usize) -> bool {
        self.slot[i] == self.slot[j]
    }

    /// `b × b` same-video indicator (symmetric, true diagonal).
    pub fn same_video_matrix(&self) -> Vec<Vec<bool>> {
        let b = self.len();
        (0..b)
            .map(|i| (0..b).map(|j| self.same_video(i, j)).collect())
            .collect()
    }

    /// Batch positions belonging to slot `s`.
    pub fn positions_of(&self, s: usize) -> core::ops::Range<usize> {
        s * self.per_video..(s + 1) * self.per_video
    }
}

/// Samples `videos` distinct videos uniformly, then `per_video` pairs with
/// replacement from each.
pub fn sample_minibatch<R: Rng + ?Sized>(
    corpus: &Corpus,
    videos: usize,
    per_video: usize,
    rng: &mut R,
) -> Result<MiniBatch> {
    if videos == 0 || per_video == 0 || videos * per_video < 2 {
        return Err(Error::Invalid(format!(
            "batch of {videos} videos × {per_video} pairs must hold at least two pairs"
        )));
    }
    let available = corpus.videos.len();
    if available < videos {
        return Err(Error::NotEnoughVideos {
            required: videos,
            available,
        });
    }
    let chosen = index::sample(rng, available, videos);
    let mut pairs = Vec::with_capacity(videos * per_video);
    let mut slot = Vec::with_capacity(videos * per_video);
    for (s, vi) in chosen.iter().enumerate() {
        let members = &corpus.videos[vi].1;
        for _ in 0..per_video {
            pairs.push(members[rng.random_range(0..members.len())]);
            slot.push(s);
        }
    }
    Ok(MiniBatch {
        pairs,
        slot,
        videos,
        per_video,
    })
}

/// Weight given to same-video negatives so that intra:inter mass is `p:(1−p)`.
pub fn intra_weight(p_intra: f64, videos: usize, per_video: usize) -> Result<f64> {
    if !(0.0..1.0).contains(&p_intra) {
        return Err(Error::Invalid(format!("p_intra must lie in [0, 1), got {p_intra}")));
    }
    if p_intra == 0.0 {
        return Ok(0.0);
    }
    if per_video < 2 {
        return Err(Error::Invalid(
            "intra-video weighting needs at least two pairs per video".into(),
        ));
    }
    if videos < 2 {
        return Err(Error::Invalid(
            "intra-video weighting needs at least two videos per batch".into(),
        ));
    }
    let k = per_video as f64;
    let v = videos as f64;
    Ok(p_intra * k * (v - 1.0) / ((1.0 - p_intra) * (k - 1.0)))
}

/// The intra proportion at which every off-diagonal weight equals one.
pub fn natural_intra_proportion(videos: usize, per_video: usize) -> f64 {
    let k = per_video as f64;
    let v = videos as f64;
    (k - 1.0) / (k * v - 1.0)
}

/// `α[i][j]`: intra weight for same-video pairs, 1 across videos, 0 on the diagonal.
pub fn negative_weights(batch: &MiniBatch, p_intra: f64) -> Result<Matrix> {
    let alpha = intra_weight(p_intra, batch.videos, batch.per_video)?;
    let b = batch.len();
    Ok(Matrix::from_fn(b, b, |i, j| {
        if i == j {
            0.0
        } else if batch.same_video(i, j) {
            alpha
        } else {
            1.0
        }
    }))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::dataset::Pair;
    use crate::text::TokenSequence;
    use alloc::string::ToString;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn toy_corpus(sizes: &[usize]) -> Corpus {
        let mut c = Corpus::default();
        for (v, &n) in sizes.iter().enumerate() {
            let mut members = Vec::new();
            for i in 0..n {
                members.push(c.pairs.len());
                c.pairs.push(Pair {
                    clip_id: format!("v{v}c{i}"),
                    video: v,
                    clip: vec![0.0],
                    caption: TokenSequence {
                        tokens: vec!["x".to_string()],
                        embedded: Matrix::zeros(1, 1),
                    },
                });
            }
            c.videos.push((format!("v{v}"), members));
        }
        c
    }

    #[test]
    fn replacement_forced_for_single_clip_video() {
        let corpus = toy_corpus(&[3, 1]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let b = sample_minibatch(&corpus, 2, 2, &mut rng).unwrap();
        assert_eq!(b.len(), 4);
        let single = b.pairs.iter().filter(|&&p| p == 3).count();
        assert_eq!(single, 2);
        let m = b.same_video_matrix();
        for i in 0..4 {
            assert!(m[i][i]);
            for j in 0..4 {
                assert_eq!(m[i][j], m[j][i]);
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_and_checks_video_count() {
        let corpus = toy_corpus(&[4, 4, 4, 4]);
        let a = sample_minibatch(&corpus, 3, 5, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_minibatch(&corpus, 3, 5, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        let small = toy_corpus(&[2, 2]);
        assert_eq!(
            sample_minibatch(&small, 3, 2, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err(),
            Error::NotEnoughVideos {
                required: 3,
                available: 2
            }
        );
    }

    #[test]
    fn paper_operating_point_weight() {
        let a = intra_weight(0.5, 32, 64).unwrap();
        assert!((a - 1984.0 / 63.0).abs() < 1e-12);
        assert!((a - 31.4921).abs() < 1e-4);
    }

    #[test]
    fn natural_proportion_is_neutral() {
        for (v, k) in [(2, 2), (32, 64), (5, 3)] {
            let p = natural_intra_proportion(v, k);
            assert!((intra_weight(p, v, k).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_proportion_disables_intra() {
        let corpus = toy_corpus(&[3, 3]);
        let b = sample_minibatch(&corpus, 2, 2, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let w = negative_weights(&b, 0.0).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j || b.same_video(i, j) { 0.0 } else { 1.0 };
                assert_eq!(w.get(i, j), want);
            }
        }
    }

    #[test]
    fn single_pair_per_video_rejects_intra() {
        assert!(intra_weight(0.5, 4, 1).is_err());
        assert_eq!(intra_weight(0.0, 4, 1).unwrap(), 0.0);
        assert!(intra_weight(1.0, 4, 2).is_err());
    }
}
