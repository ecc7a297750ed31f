//! Recall@K over exact nearest neighbors.

use std::collections::BTreeMap;

use ndarray::Array2;

use crate::error::{Error, Result};

/// For each query row, searches its K nearest neighbors (the query itself
/// excluded, distance ties broken by ascending index) and scores 1 if any
/// neighbor shares the query's class. Returns the mean score per K.
pub fn recall_at_k(
    embeddings: &Array2<f64>,
    labels: &[u32],
    ks: &[usize],
) -> Result<BTreeMap<usize, f64>> {
    let n = embeddings.nrows();
    if n < 2 {
        return Err(Error::InvalidInput(
            "recall@k requires at least 2 points".into(),
        ));
    }
    if labels.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {n} embedding rows",
            labels.len()
        )));
    }
    for &k in ks {
        if k == 0 || k >= n {
            return Err(Error::InvalidInput(format!(
                "K must satisfy 1 <= K <= n-1 = {}, got {k}",
                n - 1
            )));
        }
    }

    // Rank of the first same-class neighbor per query (1-based), None if the
    // query's class is a singleton.
    let mut first_hit_rank: Vec<Option<usize>> = Vec::with_capacity(n);
    for q in 0..n {
        let qr = embeddings.row(q);
        let mut order: Vec<usize> = (0..n).filter(|&i| i != q).collect();
        let dist_sq = |i: usize| -> f64 {
            embeddings
                .row(i)
                .iter()
                .zip(qr.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum()
        };
        let dists: Vec<f64> = (0..n).map(dist_sq).collect();
        order.sort_by(|&a, &b| {
            dists[a]
                .partial_cmp(&dists[b])
                .unwrap()
                .then(a.cmp(&b))
        });
        first_hit_rank.push(
            order
                .iter()
                .position(|&i| labels[i] == labels[q])
                .map(|p| p + 1),
        );
    }

    let mut out = BTreeMap::new();
    for &k in ks {
        let hits = first_hit_rank
            .iter()
            .filter(|r| matches!(r, Some(rank) if *rank <= k))
            .count();
        out.insert(k, hits as f64 / n as f64);
    }
    Ok(out)
}
