//! Clustering quality metrics: normalized mutual information and pairwise F1.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// A hard cluster assignment over `n` points.
#[derive(Debug, Clone)]
pub struct Clustering {
    assignment: Vec<usize>,
    k: usize,
}

impl Clustering {
    pub fn new(assignment: Vec<usize>, k: usize) -> Result<Self> {
        if assignment.is_empty() {
            return Err(Error::InvalidInput("empty cluster assignment".into()));
        }
        if let Some(&bad) = assignment.iter().find(|&&id| id >= k) {
            return Err(Error::InvalidInput(format!(
                "cluster id {bad} out of range for k={k}"
            )));
        }
        Ok(Self { assignment, k })
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Number of clusters with no assigned points.
    pub fn empty_clusters(&self) -> usize {
        let mut seen = vec![false; self.k];
        for &a in &self.assignment {
            seen[a] = true;
        }
        seen.iter().filter(|&&s| !s).count()
    }
}

fn entropy(counts: &[usize], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Normalized mutual information between a clustering and the class labels:
/// `I(Ω;C) / ((H(Ω)+H(C))/2)`, natural log, with `0·log 0 = 0`.
///
/// Degenerate cases: both partitions trivial (zero entropy) gives 1.0; exactly
/// one trivial gives 0.0.
pub fn nmi(clustering: &Clustering, labels: &[u32]) -> Result<f64> {
    let n = clustering.len();
    if labels.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {n} cluster assignments",
            labels.len()
        )));
    }
    let label_ids: BTreeMap<u32, usize> = labels
        .iter()
        .cloned()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .enumerate()
        .map(|(i, l)| (l, i))
        .collect();
    let kc = clustering.k();
    let kl = label_ids.len();
    let mut table = vec![vec![0usize; kl]; kc];
    let mut cluster_counts = vec![0usize; kc];
    let mut label_counts = vec![0usize; kl];
    for (row, (&c, &l)) in clustering.assignment().iter().zip(labels).enumerate() {
        let _ = row;
        let li = label_ids[&l];
        table[c][li] += 1;
        cluster_counts[c] += 1;
        label_counts[li] += 1;
    }
    let nf = n as f64;
    let h_omega = entropy(&cluster_counts, nf);
    let h_c = entropy(&label_counts, nf);
    if h_omega == 0.0 && h_c == 0.0 {
        return Ok(1.0);
    }
    if h_omega == 0.0 || h_c == 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for c in 0..kc {
        for l in 0..kl {
            let joint = table[c][l];
            if joint == 0 {
                continue;
            }
            let p = joint as f64 / nf;
            let pc = cluster_counts[c] as f64 / nf;
            let pl = label_counts[l] as f64 / nf;
            mi += p * (p / (pc * pl)).ln();
        }
    }
    Ok((mi / ((h_omega + h_c) / 2.0)).clamp(0.0, 1.0))
}

/// Pairwise F1: precision and recall over co-clustering events of all
/// `C(n,2)` item pairs, `F1 = 2PR/(P+R)`.
///
/// When neither partition co-clusters any pair the two partitions are both
/// all-singletons and therefore identical, so the score is 1.0; with the
/// hinge only on one side the usual formula yields 0.
pub fn pairwise_f1(clustering: &Clustering, labels: &[u32]) -> Result<f64> {
    let n = clustering.len();
    if labels.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "{} labels for {n} cluster assignments",
            labels.len()
        )));
    }
    if n < 2 {
        return Err(Error::InvalidInput(
            "pairwise F1 requires at least 2 points".into(),
        ));
    }
    let assignment = clustering.assignment();
    let mut both = 0usize; // same class and same cluster
    let mut same_cluster = 0usize;
    let mut same_class = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            let sc = assignment[i] == assignment[j];
            let sl = labels[i] == labels[j];
            same_cluster += sc as usize;
            same_class += sl as usize;
            both += (sc && sl) as usize;
        }
    }
    if same_cluster == 0 && same_class == 0 {
        return Ok(1.0);
    }
    let precision = if same_cluster == 0 {
        0.0
    } else {
        both as f64 / same_cluster as f64
    };
    let recall = if same_class == 0 {
        0.0
    } else {
        both as f64 / same_class as f64
    };
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}
