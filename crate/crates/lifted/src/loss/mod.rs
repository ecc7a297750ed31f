//! Loss functions: contrastive and triplet baselines plus the lifted
//! structured loss in its non-smooth and smooth (log-sum-exp) forms.
//!
//! Every loss returns a [`LossOutput`]: a scalar value and the exact analytic
//! gradient with respect to the embedded features, row for row.

mod contrastive;
mod lifted;
mod triplet;

pub use contrastive::contrastive_loss;
pub use lifted::{
    accumulate_embedding_grads, lifted_distance_grads, lifted_loss_nonsmooth,
    lifted_loss_nonsmooth_with_pairs, lifted_loss_smooth, lifted_loss_smooth_with_pairs,
    PairGradients, PositivePairGrad,
};
pub use triplet::{triplet_loss, TripletBatch};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::batch::EmbeddingBatch;
use crate::error::{Error, Result};

/// Threshold below which a pairwise distance is treated as zero when forming
/// the chain factor `(f(x_i) - f(x_j)) / D_{i,j}`; the factor becomes the
/// zero vector, which is a valid subgradient for coincident points.
pub(crate) const ZERO_DIST_EPS: f64 = 1e-12;

/// Shared loss hyperparameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LossConfig {
    /// Margin parameter alpha.
    pub margin_alpha: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self { margin_alpha: 1.0 }
    }
}

impl LossConfig {
    pub fn new(margin_alpha: f64) -> Result<Self> {
        if !(margin_alpha >= 0.0) || !margin_alpha.is_finite() {
            return Err(Error::InvalidInput(format!(
                "margin_alpha must be a finite non-negative real, got {margin_alpha}"
            )));
        }
        Ok(Self { margin_alpha })
    }
}

/// Scalar loss value plus the `m x c` gradient with respect to each embedded
/// row.
#[derive(Debug, Clone)]
pub struct LossOutput {
    pub value: f64,
    pub grad: Array2<f64>,
}

/// Which of the four losses a run trains with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    Contrastive,
    Triplet,
    LiftedNonsmooth,
    LiftedSmooth,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [
        LossKind::Contrastive,
        LossKind::Triplet,
        LossKind::LiftedNonsmooth,
        LossKind::LiftedSmooth,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            LossKind::Contrastive => "contrastive",
            LossKind::Triplet => "triplet",
            LossKind::LiftedNonsmooth => "lifted-nonsmooth",
            LossKind::LiftedSmooth => "lifted-smooth",
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "contrastive" => Ok(LossKind::Contrastive),
            "triplet" => Ok(LossKind::Triplet),
            "lifted-nonsmooth" => Ok(LossKind::LiftedNonsmooth),
            "lifted-smooth" => Ok(LossKind::LiftedSmooth),
            other => Err(Error::Config(format!(
                "unknown loss `{other}` (expected contrastive, triplet, lifted-nonsmooth, lifted-smooth)"
            ))),
        }
    }
}

impl std::fmt::Display for LossKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A loss together with the pairing structure it needs, so callers (the
/// trainer, the gradient checker) can evaluate any of the four uniformly.
#[derive(Debug, Clone)]
pub enum LossSpec {
    /// Disjoint pairs `(i, j, is_positive)` covering an even-sized batch.
    Contrastive(Vec<(usize, usize, bool)>),
    Triplet(TripletBatch),
    LiftedNonsmooth,
    LiftedSmooth,
}

impl LossSpec {
    pub fn kind(&self) -> LossKind {
        match self {
            LossSpec::Contrastive(_) => LossKind::Contrastive,
            LossSpec::Triplet(_) => LossKind::Triplet,
            LossSpec::LiftedNonsmooth => LossKind::LiftedNonsmooth,
            LossSpec::LiftedSmooth => LossKind::LiftedSmooth,
        }
    }

    pub fn evaluate(&self, batch: &EmbeddingBatch, cfg: &LossConfig) -> Result<LossOutput> {
        match self {
            LossSpec::Contrastive(pairing) => contrastive_loss(batch, pairing, cfg),
            LossSpec::Triplet(triplets) => triplet_loss(batch, triplets, cfg),
            LossSpec::LiftedNonsmooth => lifted_loss_nonsmooth(batch, cfg),
            LossSpec::LiftedSmooth => lifted_loss_smooth(batch, cfg),
        }
    }

    /// Distance of the batch from the nearest non-smooth breakpoint of this
    /// loss (hinge boundaries, max-branch ties, coincident points feeding a
    /// square root). The gradient checker skips or re-jitters batches where
    /// this is small.
    pub fn breakpoint_margin(&self, batch: &EmbeddingBatch, cfg: &LossConfig) -> f64 {
        let d = crate::batch::pairwise_sq_distances(batch);
        let alpha = cfg.margin_alpha;
        let mut margin = f64::INFINITY;
        match self {
            LossSpec::Contrastive(pairing) => {
                for &(i, j, positive) in pairing {
                    let dij = d.dist()[[i, j]];
                    if !positive {
                        margin = margin.min((alpha - dij).abs());
                        margin = margin.min(dij); // sqrt kink at coincidence
                    }
                }
            }
            LossSpec::Triplet(t) => {
                // Squared distances only: the sole non-smoothness is the hinge.
                for k in 0..t.len() {
                    let (a, p, n) = t.get(k);
                    let arg = d.sq()[[a, p]] - d.sq()[[a, n]] + alpha;
                    margin = margin.min(arg.abs());
                }
            }
            LossSpec::LiftedNonsmooth | LossSpec::LiftedSmooth => {
                let pairs = crate::batch::pair_sets(batch.labels());
                for &(i, j) in &pairs.positives {
                    let neg_i: Vec<f64> = pairs
                        .negatives_incident(i)
                        .map(|k| alpha - d.dist()[[i, k]])
                        .collect();
                    let neg_j: Vec<f64> = pairs
                        .negatives_incident(j)
                        .map(|l| alpha - d.dist()[[j, l]])
                        .collect();
                    if neg_i.is_empty() && neg_j.is_empty() {
                        continue;
                    }
                    let dij = d.dist()[[i, j]];
                    margin = margin.min(dij);
                    for k in pairs.negatives_incident(i) {
                        margin = margin.min(d.dist()[[i, k]]);
                    }
                    for l in pairs.negatives_incident(j) {
                        margin = margin.min(d.dist()[[j, l]]);
                    }
                    match self {
                        LossSpec::LiftedSmooth => {
                            let mut all = neg_i.clone();
                            all.extend_from_slice(&neg_j);
                            let hi = all.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                            let lse =
                                hi + all.iter().map(|t| (t - hi).exp()).sum::<f64>().ln();
                            margin = margin.min((lse + dij).abs());
                        }
                        LossSpec::LiftedNonsmooth => {
                            let mut all = neg_i.clone();
                            all.extend_from_slice(&neg_j);
                            all.sort_by(|a, b| b.partial_cmp(a).unwrap());
                            margin = margin.min((all[0] + dij).abs());
                            if all.len() > 1 {
                                margin = margin.min(all[0] - all[1]);
                            }
                        }
                        _ => unreachable!(),
                    }
                }
            }
        }
        margin
    }
}
