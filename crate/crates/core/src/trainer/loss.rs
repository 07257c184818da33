//! Weighted bidirectional max-margin ranking loss and positive-pair max-pooling.

use alloc::vec::Vec;

use crate::error::{check_len, Result};
use crate::matrix::Matrix;

/// Loss value, its subgradient with respect to every similarity entry, and
/// the number of active (positive, nonzero-weight) hinge terms.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingLoss {
    pub loss: f64,
    pub grad: Matrix,
    pub active: usize,
}

/// `Σ_i Σ_{j≠i} α_ij [max(0, δ + s_ij − s_ii) + max(0, δ + s_ji − s_ii)]`,
/// summed rather than averaged. The hinge subgradient at the kink is zero.
pub fn ranking_loss(sim: &Matrix, alpha: &Matrix, margin: f64) -> Result<RankingLoss> {
    let b = sim.rows();
    check_len("similarity matrix columns", b, sim.cols())?;
    check_len("weight matrix rows", b, alpha.rows())?;
    check_len("weight matrix columns", b, alpha.cols())?;
    let mut grad = Matrix::zeros(b, b);
    let mut loss = 0.0;
    let mut active = 0;
    for i in 0..b {
        let s_ii = sim.get(i, i);
        let mut diag = 0.0;
        for j in 0..b {
            let a = alpha.get(i, j);
            if j == i || a == 0.0 {
                continue;
            }
            // negative caption j for clip i
            let t = margin + sim.get(i, j) - s_ii;
            if t > 0.0 {
                loss += a * t;
                grad.set(i, j, grad.get(i, j) + a);
                diag -= a;
                active += 1;
            }
            // negative clip j for caption i
            let t = margin + sim.get(j, i) - s_ii;
            if t > 0.0 {
                loss += a * t;
                grad.set(j, i, grad.get(j, i) + a);
                diag -= a;
                active += 1;
            }
        }
        grad.set(i, i, grad.get(i, i) + diag);
    }
    Ok(RankingLoss { loss, grad, active })
}

/// Number of pairs kept at max-pool rate `rate` out of `n`: `⌈rate·n⌉`, at least one.
pub fn retained_count(n: usize, rate: f64) -> usize {
    // absorb representation error such as 0.7·10 = 7.000000000000001
    let x = rate * n as f64;
    let k = libm::ceil(x - 1e-9 * x.max(1.0)) as usize;
    k.clamp(1, n.max(1)).min(n)
}

/// Indices of the `⌈rate·N⌉` highest scores (lower index wins ties), ascending.
pub fn select_positive_pairs(scores: &[f64], rate: f64) -> Vec<usize> {
    let keep = retained_count(scores.len(), rate);
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    order.truncate(keep);
    order.sort_unstable();
    order
}
