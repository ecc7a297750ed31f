//! Lloyd's algorithm with k-means++ seeding, deterministic per seed.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::eval::Clustering;

fn sq_dist(a: ndarray::ArrayView1<f64>, b: ndarray::ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Clusters `points` into `k` groups. Terminates at an assignment fixpoint or
/// after `max_iters` Lloyd iterations. Empty clusters keep their previous
/// centroid.
pub fn kmeans(points: &Array2<f64>, k: usize, seed: u64, max_iters: usize) -> Result<Clustering> {
    let n = points.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!(
            "k must satisfy 1 <= k <= n = {n}, got {k}"
        )));
    }
    let d = points.ncols();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // k-means++ seeding.
    let mut centroids = Array2::<f64>::zeros((k, d));
    let first = rng.gen_range(0..n);
    centroids.row_mut(0).assign(&points.row(first));
    let mut min_sq: Vec<f64> = (0..n)
        .map(|i| sq_dist(points.row(i), centroids.row(0)))
        .collect();
    for c in 1..k {
        let total: f64 = min_sq.iter().sum();
        let chosen = if total <= 0.0 {
            // All remaining points coincide with a centroid; pick uniformly.
            rng.gen_range(0..n)
        } else {
            let mut target = rng.gen_range(0.0..total);
            let mut pick = n - 1;
            for (i, &w) in min_sq.iter().enumerate() {
                if target < w {
                    pick = i;
                    break;
                }
                target -= w;
            }
            pick
        };
        centroids.row_mut(c).assign(&points.row(chosen));
        for i in 0..n {
            min_sq[i] = min_sq[i].min(sq_dist(points.row(i), centroids.row(c)));
        }
    }

    let mut assignment = vec![0usize; n];
    for _ in 0..max_iters.max(1) {
        let mut changed = false;
        for i in 0..n {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for c in 0..k {
                let dd = sq_dist(points.row(i), centroids.row(c));
                if dd < best_d {
                    best_d = dd;
                    best = c;
                }
            }
            if assignment[i] != best {
                assignment[i] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut counts = vec![0usize; k];
        let mut sums = Array2::<f64>::zeros((k, d));
        for i in 0..n {
            counts[assignment[i]] += 1;
            let mut row = sums.row_mut(assignment[i]);
            row += &points.row(i);
        }
        for c in 0..k {
            if counts[c] > 0 {
                let mut row = centroids.row_mut(c);
                row.assign(&(&sums.row(c) / counts[c] as f64));
            }
        }
    }
    Clustering::new(assignment, k)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn two_separated_blobs() {
        let points = array![
            [0.0, 0.0],
            [0.1, 0.0],
            [0.0, 0.1],
            [10.0, 10.0],
            [10.1, 10.0],
            [10.0, 10.1]
        ];
        let c = kmeans(&points, 2, 42, 100).unwrap();
        let a = c.assignment();
        assert_eq!(a[0], a[1]);
        assert_eq!(a[1], a[2]);
        assert_eq!(a[3], a[4]);
        assert_eq!(a[4], a[5]);
        assert_ne!(a[0], a[3]);
    }

    #[test]
    fn k_equals_n() {
        let points = array![[0.0], [1.0], [2.0]];
        let c = kmeans(&points, 3, 1, 50).unwrap();
        let mut ids: Vec<usize> = c.assignment().to_vec();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), 3);
    }

    #[test]
    fn k_one_is_single_cluster() {
        let points = array![[0.0], [2.0], [4.0]];
        let c = kmeans(&points, 1, 1, 50).unwrap();
        assert!(c.assignment().iter().all(|&a| a == 0));
    }

    #[test]
    fn deterministic_per_seed() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let points = Array2::from_shape_fn((30, 4), |_| rng.gen_range(-1.0..1.0f64));
        let a = kmeans(&points, 5, 9, 100).unwrap();
        let b = kmeans(&points, 5, 9, 100).unwrap();
        assert_eq!(a.assignment(), b.assignment());
    }

    #[test]
    fn rejects_k_greater_than_n() {
        let points = array![[0.0], [1.0]];
        assert!(kmeans(&points, 3, 1, 10).is_err());
    }

    #[test]
    fn objective_non_increasing() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let points = Array2::from_shape_fn((40, 3), |_| rng.gen_range(-2.0..2.0f64));
        // Run with increasing iteration caps; the final inertia must not grow.
        let inertia = |c: &Clustering| -> f64 {
            let k = c.k();
            let mut counts = vec![0usize; k];
            let mut sums = Array2::<f64>::zeros((k, 3));
            for (i, &a) in c.assignment().iter().enumerate() {
                counts[a] += 1;
                let mut row = sums.row_mut(a);
                row += &points.row(i);
            }
            let mut total = 0.0;
            for (i, &a) in c.assignment().iter().enumerate() {
                for j in 0..3 {
                    let centroid = sums[[a, j]] / counts[a] as f64;
                    let diff = points[[i, j]] - centroid;
                    total += diff * diff;
                }
            }
            total
        };
        let mut prev = f64::INFINITY;
        for iters in [1, 2, 4, 8, 16, 64] {
            let c = kmeans(&points, 4, 7, iters).unwrap();
            let v = inertia(&c);
            assert!(v <= prev + 1e-9);
            prev = v;
        }
    }
}
