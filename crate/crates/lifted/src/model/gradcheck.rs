//! Central finite-difference verification of the analytic gradients,
//! end-to-end through the network and any of the four losses.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::batch::EmbeddingBatch;
use crate::error::Result;
use crate::loss::{LossConfig, LossKind, LossSpec, TripletBatch};
use crate::model::Mlp;

/// Draws a random batch suitable for checking the given loss: features,
/// labels, and a matching [`LossSpec`].
///
/// The row count is `m_hint` adjusted to the loss's divisibility rule
/// (rounded down to even for contrastive, to a multiple of 3 for triplet),
/// and labels repeat often enough that every loss sees positive pairs.
pub fn random_check_instance(
    kind: LossKind,
    m_hint: usize,
    dim: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Array2<f64>, Vec<u32>, LossSpec)> {
    match kind {
        LossKind::Contrastive => {
            let m = (m_hint.max(4) / 2) * 2;
            let mut labels = Vec::with_capacity(m);
            let mut pairing = Vec::with_capacity(m / 2);
            for p in 0..m / 2 {
                let positive = p % 2 == 0;
                if positive {
                    labels.push(p as u32);
                    labels.push(p as u32);
                } else {
                    labels.push(1000 + 2 * p as u32);
                    labels.push(1001 + 2 * p as u32);
                }
                pairing.push((2 * p, 2 * p + 1, positive));
            }
            let features = Array2::from_shape_fn((m, dim), |_| rng.gen_range(-1.0..1.0));
            Ok((features, labels, LossSpec::Contrastive(pairing)))
        }
        LossKind::Triplet => {
            let t = (m_hint / 3).max(1);
            let m = 3 * t;
            let mut labels = Vec::with_capacity(m);
            let (mut anchors, mut positives, mut negatives) =
                (Vec::with_capacity(t), Vec::with_capacity(t), Vec::with_capacity(t));
            for i in 0..t {
                anchors.push(3 * i);
                positives.push(3 * i + 1);
                negatives.push(3 * i + 2);
                labels.push(i as u32);
                labels.push(i as u32);
                labels.push(1000 + i as u32);
            }
            let features = Array2::from_shape_fn((m, dim), |_| rng.gen_range(-1.0..1.0));
            let triplets = TripletBatch::new(anchors, positives, negatives)?;
            Ok((features, labels, LossSpec::Triplet(triplets)))
        }
        LossKind::LiftedSmooth | LossKind::LiftedNonsmooth => {
            let m = m_hint.max(4);
            let classes = (m / 2).max(2);
            let labels: Vec<u32> = (0..m).map(|i| (i % classes) as u32).collect();
            let features = Array2::from_shape_fn((m, dim), |_| rng.gen_range(-1.0..1.0));
            let spec = if kind == LossKind::LiftedSmooth {
                LossSpec::LiftedSmooth
            } else {
                LossSpec::LiftedNonsmooth
            };
            Ok((features, labels, spec))
        }
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckConfig {
    /// Central-difference step `h`.
    pub step: f64,
    /// Maximum accepted relative error.
    pub tolerance: f64,
    /// Batches closer than this to a hinge/max breakpoint are re-jittered.
    pub breakpoint_margin: f64,
    /// Jitter-and-retry attempts before reporting Inconclusive.
    pub max_retries: usize,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            step: 1e-6,
            tolerance: 1e-5,
            breakpoint_margin: 1e-4,
            max_retries: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradCheckStatus {
    Pass,
    Fail,
    /// The batch could not be moved away from a non-smooth breakpoint.
    Inconclusive,
}

#[derive(Debug, Clone)]
pub struct BlockReport {
    pub name: String,
    pub max_rel_err: f64,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub blocks: Vec<BlockReport>,
    pub max_rel_err: f64,
    pub status: GradCheckStatus,
    /// How many jitter retries were consumed.
    pub retries: usize,
}

fn rel_err(a: f64, n: f64) -> f64 {
    // Near-zero gradients compare absolutely against a 1e-3 floor so that
    // finite-difference noise on exact zeros does not fail the check.
    (a - n).abs() / a.abs().max(n.abs()).max(1e-3)
}

fn loss_value(
    model: &Mlp,
    inputs: &Array2<f64>,
    labels: &[u32],
    loss: &LossSpec,
    loss_cfg: &LossConfig,
) -> Result<f64> {
    let emb = model.embed(inputs)?;
    let batch = EmbeddingBatch::new(emb, labels.to_vec())?;
    Ok(loss.evaluate(&batch, loss_cfg)?.value)
}

/// Compares analytic parameter and input gradients of `loss ∘ model` against
/// central finite differences, block by block.
///
/// Batches sitting within `breakpoint_margin` of a hinge or max tie are
/// jittered and retried; if the proximity persists the report carries the
/// `Inconclusive` status rather than a failure.
pub fn gradient_check(
    loss: &LossSpec,
    inputs: &Array2<f64>,
    labels: &[u32],
    model: &Mlp,
    loss_cfg: &LossConfig,
    cfg: &GradCheckConfig,
) -> Result<GradCheckReport> {
    let mut inputs = inputs.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(0x9bc3_77a1);
    let mut retries = 0;
    loop {
        let emb = model.embed(&inputs)?;
        let batch = EmbeddingBatch::new(emb, labels.to_vec())?;
        if loss.breakpoint_margin(&batch, loss_cfg) >= cfg.breakpoint_margin {
            break;
        }
        if retries >= cfg.max_retries {
            return Ok(GradCheckReport {
                blocks: Vec::new(),
                max_rel_err: f64::NAN,
                status: GradCheckStatus::Inconclusive,
                retries,
            });
        }
        retries += 1;
        inputs.mapv_inplace(|v| v + rng.gen_range(-5e-3..5e-3));
    }

    // Analytic pass.
    let cache = model.forward(&inputs)?;
    let batch = EmbeddingBatch::new(cache.output().clone(), labels.to_vec())?;
    let out = loss.evaluate(&batch, loss_cfg)?;
    let analytic = model.backward(&cache, &out.grad)?;

    let h = cfg.step;
    let mut blocks = Vec::new();
    let mut scratch = model.clone();
    for idx in 0..model.num_layers() {
        let mut worst = 0.0f64;
        let shape = model.layers[idx].weight.dim();
        for r in 0..shape.0 {
            for c in 0..shape.1 {
                let orig = scratch.layers[idx].weight[[r, c]];
                scratch.layers[idx].weight[[r, c]] = orig + h;
                let plus = loss_value(&scratch, &inputs, labels, loss, loss_cfg)?;
                scratch.layers[idx].weight[[r, c]] = orig - h;
                let minus = loss_value(&scratch, &inputs, labels, loss, loss_cfg)?;
                scratch.layers[idx].weight[[r, c]] = orig;
                let numeric = (plus - minus) / (2.0 * h);
                worst = worst.max(rel_err(analytic.weights[idx][[r, c]], numeric));
            }
        }
        blocks.push(BlockReport {
            name: format!("layer {idx} weight"),
            max_rel_err: worst,
        });

        let mut worst = 0.0f64;
        for r in 0..model.layers[idx].bias.len() {
            let orig = scratch.layers[idx].bias[r];
            scratch.layers[idx].bias[r] = orig + h;
            let plus = loss_value(&scratch, &inputs, labels, loss, loss_cfg)?;
            scratch.layers[idx].bias[r] = orig - h;
            let minus = loss_value(&scratch, &inputs, labels, loss, loss_cfg)?;
            scratch.layers[idx].bias[r] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            worst = worst.max(rel_err(analytic.biases[idx][r], numeric));
        }
        blocks.push(BlockReport {
            name: format!("layer {idx} bias"),
            max_rel_err: worst,
        });
    }

    // Input block: verifies the loss gradient chained to the network input.
    let mut worst = 0.0f64;
    let mut perturbed = inputs.clone();
    for r in 0..inputs.nrows() {
        for c in 0..inputs.ncols() {
            let orig = perturbed[[r, c]];
            perturbed[[r, c]] = orig + h;
            let plus = loss_value(model, &perturbed, labels, loss, loss_cfg)?;
            perturbed[[r, c]] = orig - h;
            let minus = loss_value(model, &perturbed, labels, loss, loss_cfg)?;
            perturbed[[r, c]] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            worst = worst.max(rel_err(analytic.input[[r, c]], numeric));
        }
    }
    blocks.push(BlockReport {
        name: "input".into(),
        max_rel_err: worst,
    });

    let max_rel_err = blocks.iter().map(|b| b.max_rel_err).fold(0.0, f64::max);
    let status = if max_rel_err <= cfg.tolerance {
        GradCheckStatus::Pass
    } else {
        GradCheckStatus::Fail
    };
    Ok(GradCheckReport {
        blocks,
        max_rel_err,
        status,
        retries,
    })
}
