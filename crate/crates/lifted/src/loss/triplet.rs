//! Triplet loss over (anchor, positive, negative) index triples.
//!
//! `J = (3/2m) Σ [ D²_ap − D²_an + α ]₊` over the triples of a batch of
//! size `m`. The hinge argument uses squared distances, so no square-root
//! chain factor appears in the gradient.

use ndarray::Array2;

use crate::batch::{pairwise_sq_distances, EmbeddingBatch};
use crate::error::{Error, Result};
use crate::loss::{LossConfig, LossOutput};

/// Parallel index arrays describing the triplets of a batch.
#[derive(Debug, Clone)]
pub struct TripletBatch {
    anchors: Vec<usize>,
    positives: Vec<usize>,
    negatives: Vec<usize>,
}

impl TripletBatch {
    pub fn new(anchors: Vec<usize>, positives: Vec<usize>, negatives: Vec<usize>) -> Result<Self> {
        if anchors.len() != positives.len() || anchors.len() != negatives.len() {
            return Err(Error::ShapeMismatch(format!(
                "triplet index arrays must be parallel, got {}/{}/{}",
                anchors.len(),
                positives.len(),
                negatives.len()
            )));
        }
        Ok(Self {
            anchors,
            positives,
            negatives,
        })
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    pub fn get(&self, t: usize) -> (usize, usize, usize) {
        (self.anchors[t], self.positives[t], self.negatives[t])
    }

    /// Checks the label constraints against a batch: anchor and positive
    /// share a class, anchor and negative do not.
    pub fn validate(&self, batch: &EmbeddingBatch) -> Result<()> {
        let labels = batch.labels();
        let m = batch.len();
        for t in 0..self.len() {
            let (a, p, n) = self.get(t);
            if a >= m || p >= m || n >= m {
                return Err(Error::InvalidInput(format!(
                    "triplet {t} references a row outside the batch"
                )));
            }
            if labels[a] != labels[p] {
                return Err(Error::InvalidInput(format!(
                    "triplet {t}: anchor {a} and positive {p} have different labels"
                )));
            }
            if labels[a] == labels[n] {
                return Err(Error::InvalidInput(format!(
                    "triplet {t}: anchor {a} and negative {n} share a label"
                )));
            }
        }
        Ok(())
    }
}

pub fn triplet_loss(
    batch: &EmbeddingBatch,
    triplets: &TripletBatch,
    cfg: &LossConfig,
) -> Result<LossOutput> {
    triplets.validate(batch)?;
    let m = batch.len();
    let d = pairwise_sq_distances(batch);
    let x = batch.features();
    let alpha = cfg.margin_alpha;
    let scale = 3.0 / (2.0 * m as f64);

    let mut value = 0.0;
    let mut grad = Array2::<f64>::zeros(x.raw_dim());
    for t in 0..triplets.len() {
        let (a, p, n) = triplets.get(t);
        let arg = d.sq()[[a, p]] - d.sq()[[a, n]] + alpha;
        if arg > 0.0 {
            value += scale * arg;
            // d(D²_ap)/df(a) = 2(fa−fp); d(−D²_an)/df(a) = −2(fa−fn)
            for c in 0..batch.dim() {
                let ap = x[[a, c]] - x[[p, c]];
                let an = x[[a, c]] - x[[n, c]];
                grad[[a, c]] += scale * 2.0 * (ap - an);
                grad[[p, c]] -= scale * 2.0 * ap;
                grad[[n, c]] += scale * 2.0 * an;
            }
        }
    }
    Ok(LossOutput { value, grad })
}
