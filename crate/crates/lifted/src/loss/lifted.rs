//! The lifted structured loss over the dense pairwise distance matrix.
//!
//! Non-smooth form: `J = 1/(2|P|) Σ_{(i,j)∈P} max(0, J_ij)²` with
//! `J_ij = max( max_{(i,k)∈N} α − D_ik , max_{(j,l)∈N} α − D_jl ) + D_ij`.
//!
//! Smooth form: the nested max is replaced by a log-sum-exp over both
//! negative sums, `J̃_ij = log( Σ_k e^{α−D_ik} + Σ_l e^{α−D_jl} ) + D_ij`,
//! computed with max-shifting. Gradients follow the per-pair distance
//! partials chained through `∂D_ij/∂f(x_i) = (f(x_i) − f(x_j)) / D_ij`,
//! accumulated over every pair touched by every positive pair.

use ndarray::Array2;

use crate::batch::{pair_sets, pairwise_sq_distances, EmbeddingBatch, PairSets, PairwiseDistances};
use crate::error::{Error, Result};
use crate::loss::{LossConfig, LossOutput, ZERO_DIST_EPS};

/// Distance partials attached to one positive pair `(i, j)`.
///
/// `d_dij` is the partial with respect to the positive distance; `neg_i` and
/// `neg_j` carry `(k, ∂/∂D_ik)` for the negatives incident to each end. All
/// partials are zero when the pair's hinge is inactive.
#[derive(Debug, Clone)]
pub struct PositivePairGrad {
    pub i: usize,
    pub j: usize,
    /// The pair's hinge argument (J̃_ij for the smooth loss).
    pub hinge_arg: f64,
    pub d_dij: f64,
    pub neg_i: Vec<(usize, f64)>,
    pub neg_j: Vec<(usize, f64)>,
}

/// Per-positive-pair distance partials for a whole batch.
#[derive(Debug, Clone)]
pub struct PairGradients {
    pub pairs: Vec<PositivePairGrad>,
    pub num_positives: usize,
}

fn incident_negatives(pairs: &PairSets, i: usize, j: usize) -> (Vec<usize>, Vec<usize>) {
    let neg_i: Vec<usize> = pairs.negatives_incident(i).collect();
    let neg_j: Vec<usize> = pairs.negatives_incident(j).collect();
    debug_assert!(!neg_i.contains(&j) && !neg_j.contains(&i));
    (neg_i, neg_j)
}

/// Distance partials of the smooth loss: `∂J̃/∂D_ij = J̃_ij/|P|` on the
/// positive distance and `−(J̃_ij/|P|) · e^{α−D_ik} / Σ e^{·}` on each
/// incident negative, all gated by the indicator `J̃_ij > 0`.
pub fn lifted_distance_grads(
    d: &PairwiseDistances,
    pairs: &PairSets,
    cfg: &LossConfig,
) -> Result<PairGradients> {
    let alpha = cfg.margin_alpha;
    let num_positives = pairs.positives.len();
    let inv_p = 1.0 / num_positives as f64;
    let mut out = Vec::with_capacity(num_positives);

    for &(i, j) in &pairs.positives {
        let (neg_i_idx, neg_j_idx) = incident_negatives(pairs, i, j);
        if neg_i_idx.is_empty() && neg_j_idx.is_empty() {
            return Err(Error::NoIncidentNegatives { i, j });
        }
        let dij = d.dist()[[i, j]];
        let terms_i: Vec<f64> = neg_i_idx.iter().map(|&k| alpha - d.dist()[[i, k]]).collect();
        let terms_j: Vec<f64> = neg_j_idx.iter().map(|&l| alpha - d.dist()[[j, l]]).collect();
        let hi = terms_i
            .iter()
            .chain(terms_j.iter())
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = terms_i
            .iter()
            .chain(terms_j.iter())
            .map(|t| (t - hi).exp())
            .sum();
        let lse = hi + sum.ln();
        let hinge_arg = lse + dij;

        let mut pair = PositivePairGrad {
            i,
            j,
            hinge_arg,
            d_dij: 0.0,
            neg_i: Vec::new(),
            neg_j: Vec::new(),
        };
        if hinge_arg > 0.0 {
            let base = inv_p * hinge_arg;
            pair.d_dij = base;
            // e^{α−D} / e^{J̃−D_ij} written as e^{(α−D) − lse} for stability.
            pair.neg_i = neg_i_idx
                .iter()
                .zip(&terms_i)
                .map(|(&k, &t)| (k, -base * (t - lse).exp()))
                .collect();
            pair.neg_j = neg_j_idx
                .iter()
                .zip(&terms_j)
                .map(|(&l, &t)| (l, -base * (t - lse).exp()))
                .collect();
        }
        out.push(pair);
    }
    Ok(PairGradients {
        pairs: out,
        num_positives,
    })
}

/// Chains per-pair distance partials into the `m x c` embedding gradient,
/// accumulating symmetric contributions to both endpoints of every touched
/// pair. Coincident pairs (`D < 1e-12`) contribute a zero chain factor.
pub fn accumulate_embedding_grads(
    d: &PairwiseDistances,
    pair_grads: &PairGradients,
    batch: &EmbeddingBatch,
) -> Array2<f64> {
    let x = batch.features();
    let c = batch.dim();
    let mut grad = Array2::<f64>::zeros(x.raw_dim());

    let add_pair = |grad: &mut Array2<f64>, a: usize, b: usize, g: f64| {
        let dist = d.dist()[[a, b]];
        if dist < ZERO_DIST_EPS {
            return;
        }
        let scale = g / dist;
        for t in 0..c {
            let diff = x[[a, t]] - x[[b, t]];
            grad[[a, t]] += scale * diff;
            grad[[b, t]] -= scale * diff;
        }
    };

    for pair in &pair_grads.pairs {
        add_pair(&mut grad, pair.i, pair.j, pair.d_dij);
        for &(k, g) in &pair.neg_i {
            add_pair(&mut grad, pair.i, k, g);
        }
        for &(l, g) in &pair.neg_j {
            add_pair(&mut grad, pair.j, l, g);
        }
    }
    grad
}

fn value_from_pairs(pair_grads: &PairGradients) -> f64 {
    let sum: f64 = pair_grads
        .pairs
        .iter()
        .map(|p| p.hinge_arg.max(0.0).powi(2))
        .sum();
    sum / (2.0 * pair_grads.num_positives as f64)
}

/// Smooth lifted loss restricted to explicit pair sets (used when negatives
/// are subsampled).
pub fn lifted_loss_smooth_with_pairs(
    batch: &EmbeddingBatch,
    pairs: &PairSets,
    cfg: &LossConfig,
) -> Result<LossOutput> {
    if pairs.positives.is_empty() {
        return Err(Error::InvalidInput(
            "lifted loss requires at least one positive pair".into(),
        ));
    }
    let d = pairwise_sq_distances(batch);
    let pair_grads = lifted_distance_grads(&d, pairs, cfg)?;
    let value = value_from_pairs(&pair_grads);
    let grad = accumulate_embedding_grads(&d, &pair_grads, batch);
    Ok(LossOutput { value, grad })
}

/// Smooth lifted loss over all in-batch pairs.
pub fn lifted_loss_smooth(batch: &EmbeddingBatch, cfg: &LossConfig) -> Result<LossOutput> {
    lifted_loss_smooth_with_pairs(batch, &pair_sets(batch.labels()), cfg)
}

/// Non-smooth lifted loss restricted to explicit pair sets. The subgradient
/// flows through the single active max branch; when the two sides tie, the
/// `(i, k)` side wins, and within a side the smallest index wins.
pub fn lifted_loss_nonsmooth_with_pairs(
    batch: &EmbeddingBatch,
    pairs: &PairSets,
    cfg: &LossConfig,
) -> Result<LossOutput> {
    if pairs.positives.is_empty() {
        return Err(Error::InvalidInput(
            "lifted loss requires at least one positive pair".into(),
        ));
    }
    let d = pairwise_sq_distances(batch);
    let alpha = cfg.margin_alpha;
    let num_positives = pairs.positives.len();
    let inv_p = 1.0 / num_positives as f64;
    let mut grad_pairs = Vec::with_capacity(num_positives);

    for &(i, j) in &pairs.positives {
        let (neg_i_idx, neg_j_idx) = incident_negatives(pairs, i, j);
        if neg_i_idx.is_empty() && neg_j_idx.is_empty() {
            return Err(Error::NoIncidentNegatives { i, j });
        }
        let side_max = |idx: &[usize], end: usize| -> Option<(usize, f64)> {
            let mut best: Option<(usize, f64)> = None;
            for &k in idx {
                let v = alpha - d.dist()[[end, k]];
                match best {
                    Some((_, bv)) if v <= bv => {}
                    _ => best = Some((k, v)),
                }
            }
            best
        };
        let best_i = side_max(&neg_i_idx, i);
        let best_j = side_max(&neg_j_idx, j);
        // First-index tie-break: the (i, k) branch wins on equality.
        let (on_i_side, (arg_k, max_val)) = match (best_i, best_j) {
            (Some(bi), Some(bj)) => {
                if bi.1 >= bj.1 {
                    (true, bi)
                } else {
                    (false, bj)
                }
            }
            (Some(bi), None) => (true, bi),
            (None, Some(bj)) => (false, bj),
            (None, None) => unreachable!(),
        };
        let dij = d.dist()[[i, j]];
        let hinge_arg = max_val + dij;

        let mut pair = PositivePairGrad {
            i,
            j,
            hinge_arg,
            d_dij: 0.0,
            neg_i: Vec::new(),
            neg_j: Vec::new(),
        };
        if hinge_arg > 0.0 {
            let base = inv_p * hinge_arg;
            pair.d_dij = base;
            if on_i_side {
                pair.neg_i.push((arg_k, -base));
            } else {
                pair.neg_j.push((arg_k, -base));
            }
        }
        grad_pairs.push(pair);
    }
    let pair_grads = PairGradients {
        pairs: grad_pairs,
        num_positives,
    };
    let value = value_from_pairs(&pair_grads);
    let grad = accumulate_embedding_grads(&d, &pair_grads, batch);
    Ok(LossOutput { value, grad })
}

/// Non-smooth lifted loss over all in-batch pairs.
pub fn lifted_loss_nonsmooth(batch: &EmbeddingBatch, cfg: &LossConfig) -> Result<LossOutput> {
    lifted_loss_nonsmooth_with_pairs(batch, &pair_sets(batch.labels()), cfg)
}
