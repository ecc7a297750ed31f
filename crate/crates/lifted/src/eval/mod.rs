//! Zero-shot evaluation: Recall@K retrieval scoring, NMI and pairwise F1
//! over clusterings, and seeded k-means at the test-class count.

mod kmeans;
mod metrics;
mod recall;

pub use kmeans::kmeans;
pub use metrics::{nmi, pairwise_f1, Clustering};
pub use recall::recall_at_k;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// The metrics of one evaluation run plus enough context to reproduce it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    /// Recall@K per K, monotone non-decreasing in K.
    pub recall_at: BTreeMap<usize, f64>,
    pub nmi: f64,
    pub f1: f64,
    /// Cluster ids per test point.
    pub cluster_assignment: Vec<usize>,
    pub num_clusters: usize,
    /// Number of empty clusters after k-means (reported, not an error).
    pub empty_clusters: usize,
    pub seed: u64,
    /// Echo of the effective configuration, key to value.
    pub config: BTreeMap<String, String>,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| crate::error::Error::InvalidInput(e.to_string()))
    }

    /// Two-column CSV of the recall curve (`k,score`) with a header line.
    pub fn recall_curve_csv(&self) -> String {
        let mut out = String::from("k,score\n");
        for (k, score) in &self.recall_at {
            out.push_str(&format!("{k},{score}\n"));
        }
        out
    }
}
