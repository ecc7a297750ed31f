//! Embedding batches, dense pairwise distances, and positive/negative pair sets.
//!
//! Everything downstream (the losses, mining, evaluation) consumes a batch of
//! `m` embedded points of dimension `c` through the types defined here. The
//! squared-distance matrix is built with the Gram identity
//! `D² = x̃1ᵀ + 1x̃ᵀ − 2XXᵀ` where `x̃` holds the squared row norms.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// A batch of `m` embedded feature vectors with per-row class labels.
#[derive(Debug, Clone)]
pub struct EmbeddingBatch {
    features: Array2<f64>,
    labels: Vec<u32>,
}

impl EmbeddingBatch {
    /// Validates shapes and finiteness. Rejects empty batches, zero-width
    /// features, label/row count mismatches, and non-finite values (reported
    /// with the offending row).
    pub fn new(features: Array2<f64>, labels: Vec<u32>) -> Result<Self> {
        let (m, c) = features.dim();
        if m == 0 || c == 0 {
            return Err(Error::InvalidInput(format!(
                "batch must have m >= 1 and c >= 1, got {m}x{c}"
            )));
        }
        if labels.len() != m {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {m} feature rows",
                labels.len()
            )));
        }
        for (row, r) in features.rows().into_iter().enumerate() {
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteFeature { row });
            }
        }
        Ok(Self { features, labels })
    }

    /// Number of rows `m`.
    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        false // m >= 1 by construction
    }

    /// Embedding dimension `c`.
    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }
}

/// Dense pairwise Euclidean distances over one batch.
///
/// `sq` holds squared distances, `dist` the element-wise square root after
/// clamping round-off negatives to zero.
#[derive(Debug, Clone)]
pub struct PairwiseDistances {
    sq: Array2<f64>,
    dist: Array2<f64>,
}

impl PairwiseDistances {
    pub fn sq(&self) -> &Array2<f64> {
        &self.sq
    }

    pub fn dist(&self) -> &Array2<f64> {
        &self.dist
    }
}

/// Builds the dense `m x m` squared-distance matrix via the Gram identity,
/// clamping tiny negative round-off values to zero and forcing the diagonal
/// to exact zero.
pub fn pairwise_sq_distances(batch: &EmbeddingBatch) -> PairwiseDistances {
    let x = batch.features();
    let m = batch.len();
    let gram = x.dot(&x.t());
    let norms: Array1<f64> = (0..m).map(|i| gram[[i, i]]).collect();

    let mut sq = Array2::<f64>::zeros((m, m));
    for i in 0..m {
        for j in 0..m {
            sq[[i, j]] = (norms[i] + norms[j] - 2.0 * gram[[i, j]]).max(0.0);
        }
        sq[[i, i]] = 0.0;
    }
    // Symmetrize: the Gram form is symmetric in exact arithmetic but the
    // floating-point evaluation order may differ across the diagonal.
    for i in 0..m {
        for j in (i + 1)..m {
            let v = sq[[i, j]];
            sq[[j, i]] = v;
        }
    }
    let dist = sq.mapv(f64::sqrt);
    PairwiseDistances { sq, dist }
}

/// Positive and negative index pairs of a batch, each stored as `(i, j)` with
/// `i < j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSets {
    pub positives: Vec<(usize, usize)>,
    pub negatives: Vec<(usize, usize)>,
}

impl PairSets {
    /// Negative pairs incident to row `i`, excluding none.
    pub fn negatives_incident(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.negatives.iter().filter_map(move |&(a, b)| {
            if a == i {
                Some(b)
            } else if b == i {
                Some(a)
            } else {
                None
            }
        })
    }
}

/// Splits all unordered pairs into positives (equal labels) and negatives.
pub fn pair_sets(labels: &[u32]) -> PairSets {
    let m = labels.len();
    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for i in 0..m {
        for j in (i + 1)..m {
            if labels[i] == labels[j] {
                positives.push((i, j));
            } else {
                negatives.push((i, j));
            }
        }
    }
    PairSets {
        positives,
        negatives,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Naive O(m²c) double-loop distance oracle.
    fn naive_sq_distances(x: &Array2<f64>) -> Array2<f64> {
        let m = x.nrows();
        let mut out = Array2::zeros((m, m));
        for i in 0..m {
            for j in 0..m {
                let mut acc = 0.0;
                for k in 0..x.ncols() {
                    let d = x[[i, k]] - x[[j, k]];
                    acc += d * d;
                }
                out[[i, j]] = acc;
            }
        }
        out
    }

    fn random_batch(rng: &mut ChaCha8Rng, m: usize, c: usize) -> EmbeddingBatch {
        let features = Array2::from_shape_fn((m, c), |_| rng.gen_range(-3.0..3.0));
        let labels = (0..m).map(|i| (i % 3) as u32).collect();
        EmbeddingBatch::new(features, labels).unwrap()
    }

    #[test]
    fn two_points_one_dim() {
        let b = EmbeddingBatch::new(array![[0.0], [3.0]], vec![0, 1]).unwrap();
        let d = pairwise_sq_distances(&b);
        assert_eq!(d.sq()[[0, 1]], 9.0);
        assert_eq!(d.sq()[[1, 0]], 9.0);
        assert_eq!(d.sq()[[0, 0]], 0.0);
        assert_eq!(d.dist()[[0, 1]], 3.0);
    }

    #[test]
    fn identical_rows_are_zero() {
        let b = EmbeddingBatch::new(array![[1.5, -2.0], [1.5, -2.0]], vec![0, 0]).unwrap();
        let d = pairwise_sq_distances(&b);
        assert!(d.sq().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let b = random_batch(&mut rng, 8, 4);
        let d = pairwise_sq_distances(&b);
        let oracle = naive_sq_distances(b.features());
        for i in 0..8 {
            for j in 0..8 {
                assert!((d.sq()[[i, j]] - oracle[[i, j]]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn translation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b = random_batch(&mut rng, 6, 3);
        let shift = array![10.0, -4.0, 2.5];
        let shifted = b.features() + &shift;
        let b2 = EmbeddingBatch::new(shifted, b.labels().to_vec()).unwrap();
        let d1 = pairwise_sq_distances(&b);
        let d2 = pairwise_sq_distances(&b2);
        for (a, b) in d1.sq().iter().zip(d2.sq().iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_non_finite() {
        let err = EmbeddingBatch::new(array![[0.0], [f64::NAN]], vec![0, 1]).unwrap_err();
        match err {
            Error::NonFiniteFeature { row } => assert_eq!(row, 1),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn rejects_label_mismatch() {
        assert!(EmbeddingBatch::new(array![[0.0], [1.0]], vec![0]).is_err());
    }

    #[test]
    fn pair_sets_two_by_two() {
        let p = pair_sets(&[0, 0, 1, 1]);
        assert_eq!(p.positives, vec![(0, 1), (2, 3)]);
        assert_eq!(p.negatives, vec![(0, 2), (0, 3), (1, 2), (1, 3)]);
    }

    #[test]
    fn pair_sets_all_distinct() {
        let p = pair_sets(&[0, 1, 2]);
        assert!(p.positives.is_empty());
        assert_eq!(p.negatives.len(), 3);
    }

    #[test]
    fn pair_sets_all_equal() {
        let p = pair_sets(&[5, 5, 5]);
        assert!(p.negatives.is_empty());
        assert_eq!(p.positives.len(), 3);
    }

    #[test]
    fn pair_count_partition() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let m = rng.gen_range(1..12);
            let labels: Vec<u32> = (0..m).map(|_| rng.gen_range(0..4)).collect();
            let p = pair_sets(&labels);
            assert_eq!(p.positives.len() + p.negatives.len(), m * (m - 1) / 2);
        }
    }

    #[test]
    fn permutation_consistency() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = random_batch(&mut rng, 7, 4);
        let d = pairwise_sq_distances(&b);
        // Reverse-row permutation.
        let m = b.len();
        let perm: Vec<usize> = (0..m).rev().collect();
        let permuted = Array2::from_shape_fn((m, b.dim()), |(i, j)| b.features()[[perm[i], j]]);
        let labels: Vec<u32> = perm.iter().map(|&i| b.labels()[i]).collect();
        let d2 = pairwise_sq_distances(&EmbeddingBatch::new(permuted, labels).unwrap());
        for i in 0..m {
            for j in 0..m {
                assert!((d2.sq()[[i, j]] - d.sq()[[perm[i], perm[j]]]).abs() < 1e-12);
            }
        }
    }
}
