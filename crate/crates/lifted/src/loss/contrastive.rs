//! Contrastive loss over disjoint labeled pairs.
//!
//! `J = (1/m) Σ [ y D² + (1−y) [α − D]₊² ]` over `m/2` disjoint pairs of an
//! even-sized batch, with `y = 1` for a same-class pair.

use ndarray::Array2;

use crate::batch::{pairwise_sq_distances, EmbeddingBatch};
use crate::error::{Error, Result};
use crate::loss::{LossConfig, LossOutput, ZERO_DIST_EPS};

pub fn contrastive_loss(
    batch: &EmbeddingBatch,
    pairing: &[(usize, usize, bool)],
    cfg: &LossConfig,
) -> Result<LossOutput> {
    let m = batch.len();
    if !m.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!(
            "contrastive loss requires an even batch size, got m={m}"
        )));
    }
    if pairing.len() != m / 2 {
        return Err(Error::InvalidInput(format!(
            "pairing must cover m/2 = {} disjoint pairs, got {}",
            m / 2,
            pairing.len()
        )));
    }
    let mut seen = vec![false; m];
    for &(i, j, _) in pairing {
        if i >= m || j >= m || i == j {
            return Err(Error::InvalidInput(format!("invalid pair indices ({i}, {j})")));
        }
        if seen[i] || seen[j] {
            return Err(Error::InvalidInput(format!(
                "pair ({i}, {j}) overlaps an earlier pair"
            )));
        }
        seen[i] = true;
        seen[j] = true;
    }

    let d = pairwise_sq_distances(batch);
    let x = batch.features();
    let alpha = cfg.margin_alpha;
    let inv_m = 1.0 / m as f64;

    let mut value = 0.0;
    let mut grad = Array2::<f64>::zeros(x.raw_dim());
    for &(i, j, positive) in pairing {
        let sq = d.sq()[[i, j]];
        let dist = d.dist()[[i, j]];
        if positive {
            value += inv_m * sq;
            // d(D²)/df(x_i) = 2 (f(x_i) - f(x_j))
            let coeff = 2.0 * inv_m;
            for t in 0..batch.dim() {
                let diff = x[[i, t]] - x[[j, t]];
                grad[[i, t]] += coeff * diff;
                grad[[j, t]] -= coeff * diff;
            }
        } else {
            let slack = alpha - dist;
            if slack > 0.0 {
                value += inv_m * slack * slack;
                // d([α−D]₊²)/dD = −2 (α − D), chained through dD/df = (fi−fj)/D
                let dl_dd = -2.0 * inv_m * slack;
                if dist >= ZERO_DIST_EPS {
                    let scale = dl_dd / dist;
                    for t in 0..batch.dim() {
                        let diff = x[[i, t]] - x[[j, t]];
                        grad[[i, t]] += scale * diff;
                        grad[[j, t]] -= scale * diff;
                    }
                }
            }
        }
    }
    Ok(LossOutput { value, grad })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn cfg() -> LossConfig {
        LossConfig::default()
    }

    #[test]
    fn positive_pair_hand_value() {
        // D = 0.5 -> value = (1/2) * 0.25 = 0.125
        let b = EmbeddingBatch::new(array![[0.0], [0.5]], vec![0, 0]).unwrap();
        let out = contrastive_loss(&b, &[(0, 1, true)], &cfg()).unwrap();
        assert!((out.value - 0.125).abs() < 1e-12);
    }

    #[test]
    fn negative_pair_hand_value() {
        // D = 0.2, alpha = 1 -> value = (1/2)(0.8)² = 0.32
        let b = EmbeddingBatch::new(array![[0.0], [0.2]], vec![0, 1]).unwrap();
        let out = contrastive_loss(&b, &[(0, 1, false)], &cfg()).unwrap();
        assert!((out.value - 0.32).abs() < 1e-12);
    }

    #[test]
    fn inactive_negative_pair_is_zero() {
        let b = EmbeddingBatch::new(array![[0.0], [2.0]], vec![0, 1]).unwrap();
        let out = contrastive_loss(&b, &[(0, 1, false)], &cfg()).unwrap();
        assert_eq!(out.value, 0.0);
        assert!(out.grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn rejects_odd_batch() {
        let b = EmbeddingBatch::new(array![[0.0], [1.0], [2.0]], vec![0, 0, 1]).unwrap();
        assert!(contrastive_loss(&b, &[(0, 1, true)], &cfg()).is_err());
    }

    #[test]
    fn rejects_overlapping_pairs() {
        let b =
            EmbeddingBatch::new(array![[0.0], [1.0], [2.0], [3.0]], vec![0, 0, 1, 1]).unwrap();
        assert!(contrastive_loss(&b, &[(0, 1, true), (1, 2, false)], &cfg()).is_err());
    }

    #[test]
    fn coincident_negative_pair_gradient_is_finite() {
        let b = EmbeddingBatch::new(array![[1.0, 1.0], [1.0, 1.0]], vec![0, 1]).unwrap();
        let out = contrastive_loss(&b, &[(0, 1, false)], &cfg()).unwrap();
        assert!((out.value - 0.5).abs() < 1e-12);
        assert!(out.grad.iter().all(|g| g.is_finite()));
    }
}
