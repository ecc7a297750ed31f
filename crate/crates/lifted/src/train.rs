//! The training loop: batch construction per loss, forward, loss, backprop,
//! momentum SGD, and a per-iteration loss log.

use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::batch::{pair_sets, EmbeddingBatch};
use crate::config::RunConfig;
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::loss::{
    lifted_loss_nonsmooth_with_pairs, lifted_loss_smooth_with_pairs, LossConfig, LossKind,
    LossOutput, LossSpec, TripletBatch,
};
use crate::model::{sgd_step, Mlp, MlpSpec, OptimizerConfig, OptimizerState};
use crate::sampler::{
    mine_hard_negatives, plan_random_batch, subsample_negative_pairs, CandidatePool, MiningConfig,
    MiningMode,
};

/// One training-log entry.
#[derive(Debug, Clone)]
pub struct LogRow {
    pub iter: usize,
    pub loss: f64,
    pub wall_ms: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub final_loss: f64,
    pub iterations_run: usize,
    pub log: Vec<LogRow>,
}

impl TrainOutcome {
    /// CSV rendering of the log: `iter,loss[,wall_ms]` with a header.
    pub fn log_csv(&self) -> String {
        let timed = self.log.iter().any(|r| r.wall_ms.is_some());
        let mut out = String::from(if timed { "iter,loss,wall_ms\n" } else { "iter,loss\n" });
        for row in &self.log {
            match row.wall_ms {
                Some(ms) => out.push_str(&format!("{},{},{}\n", row.iter, row.loss, ms)),
                None => out.push_str(&format!("{},{}\n", row.iter, row.loss)),
            }
        }
        out
    }
}

fn model_spec(cfg: &RunConfig, input_dim: usize) -> MlpSpec {
    let mut widths = Vec::with_capacity(cfg.hidden_widths.len() + 2);
    widths.push(input_dim);
    widths.extend_from_slice(&cfg.hidden_widths);
    widths.push(cfg.embedding_dim);
    let mut activations = vec![cfg.hidden_activation; widths.len() - 1];
    *activations.last_mut().unwrap() = crate::model::Activation::Identity;
    MlpSpec {
        layer_widths: widths,
        activations,
        init_seed: cfg.init_seed,
        init_scale: None,
    }
}

/// Draws one contrastive batch: `m/2` disjoint pairs alternating positive and
/// negative, so negatives are sampled in roughly equal number to positives.
fn contrastive_batch(
    dataset: &LabeledDataset,
    m: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<usize>, Vec<u32>, LossSpec)> {
    let pairable: Vec<u32> = dataset
        .class_index()
        .iter()
        .filter(|(_, rows)| rows.len() >= 2)
        .map(|(&c, _)| c)
        .collect();
    let classes: Vec<u32> = dataset.class_index().keys().cloned().collect();
    if pairable.is_empty() || classes.len() < 2 {
        return Err(Error::InvalidInput(
            "contrastive sampling needs >= 2 classes and a class with >= 2 examples".into(),
        ));
    }
    let mut rows = Vec::with_capacity(m);
    let mut pairing = Vec::with_capacity(m / 2);
    for p in 0..m / 2 {
        if p % 2 == 0 {
            let class = pairable[rng.gen_range(0..pairable.len())];
            let members = &dataset.class_index()[&class];
            let a = members[rng.gen_range(0..members.len())];
            let b = loop {
                let b = members[rng.gen_range(0..members.len())];
                if b != a || members.len() == 1 {
                    break b;
                }
            };
            pairing.push((rows.len(), rows.len() + 1, true));
            rows.push(a);
            rows.push(b);
        } else {
            let ca = classes[rng.gen_range(0..classes.len())];
            let cb = loop {
                let cb = classes[rng.gen_range(0..classes.len())];
                if cb != ca {
                    break cb;
                }
            };
            let ra = dataset.class_index()[&ca][rng.gen_range(0..dataset.class_index()[&ca].len())];
            let rb = dataset.class_index()[&cb][rng.gen_range(0..dataset.class_index()[&cb].len())];
            pairing.push((rows.len(), rows.len() + 1, false));
            rows.push(ra);
            rows.push(rb);
        }
    }
    let labels = dataset.gather_labels(&rows);
    Ok((rows, labels, LossSpec::Contrastive(pairing)))
}

/// Draws `m/3` triplets: anchor and positive from one class, negative from
/// another.
fn triplet_batch(
    dataset: &LabeledDataset,
    m: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<usize>, Vec<u32>, LossSpec)> {
    let pairable: Vec<u32> = dataset
        .class_index()
        .iter()
        .filter(|(_, rows)| rows.len() >= 2)
        .map(|(&c, _)| c)
        .collect();
    let classes: Vec<u32> = dataset.class_index().keys().cloned().collect();
    if pairable.is_empty() || classes.len() < 2 {
        return Err(Error::InvalidInput(
            "triplet sampling needs >= 2 classes and a class with >= 2 examples".into(),
        ));
    }
    let mut rows = Vec::with_capacity(m);
    let (mut anchors, mut positives, mut negatives) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..m / 3 {
        let class = pairable[rng.gen_range(0..pairable.len())];
        let members = &dataset.class_index()[&class];
        let a = members[rng.gen_range(0..members.len())];
        let p = loop {
            let p = members[rng.gen_range(0..members.len())];
            if p != a || members.len() == 1 {
                break p;
            }
        };
        let nc = loop {
            let nc = classes[rng.gen_range(0..classes.len())];
            if nc != class {
                break nc;
            }
        };
        let n = dataset.class_index()[&nc][rng.gen_range(0..dataset.class_index()[&nc].len())];
        anchors.push(rows.len());
        positives.push(rows.len() + 1);
        negatives.push(rows.len() + 2);
        rows.push(a);
        rows.push(p);
        rows.push(n);
    }
    let labels = dataset.gather_labels(&rows);
    let triplets = TripletBatch::new(anchors, positives, negatives)?;
    Ok((rows, labels, LossSpec::Triplet(triplets)))
}

fn lifted_loss_for(
    kind: LossKind,
    batch: &EmbeddingBatch,
    cfg: &RunConfig,
    loss_cfg: &LossConfig,
    rng: &mut ChaCha8Rng,
) -> Result<LossOutput> {
    let mut pairs = pair_sets(batch.labels());
    if cfg.subsample_negatives {
        pairs = subsample_negative_pairs(&pairs, rng);
    }
    match kind {
        LossKind::LiftedSmooth => lifted_loss_smooth_with_pairs(batch, &pairs, loss_cfg),
        LossKind::LiftedNonsmooth => lifted_loss_nonsmooth_with_pairs(batch, &pairs, loss_cfg),
        _ => unreachable!(),
    }
}

/// Trains an embedding network on `train_set` per the run configuration.
pub fn train(cfg: &RunConfig, train_set: &LabeledDataset) -> Result<(Mlp, TrainOutcome)> {
    cfg.validate()?;
    let m = cfg.effective_batch_size();
    let loss_cfg = LossConfig::new(cfg.margin_alpha)?;
    let mut model = Mlp::init(model_spec(cfg, train_set.dim()))?;
    let opt_cfg = OptimizerConfig {
        learning_rate: cfg.learning_rate,
        momentum: cfg.momentum,
        lr_multipliers: if cfg.last_layer_lr_multiplier != 1.0 {
            let mut mults = vec![1.0; cfg.hidden_widths.len() + 1];
            *mults.last_mut().unwrap() = cfg.last_layer_lr_multiplier;
            Some(mults)
        } else {
            None
        },
        max_iterations: cfg.max_iterations,
    };
    let mut opt_state = OptimizerState::new(&model);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.sampler_seed);
    let mining_cfg = MiningConfig {
        batch_size: m,
        negatives_per_positive_element: cfg.negatives_per_positive_element,
        candidate_pool_size: cfg.candidate_pool_size.min(train_set.len()).max(m),
        mode: cfg.mining_mode,
    };

    // Pool refreshed at epoch granularity when pool-mined mining is on.
    let epoch_len = train_set.len().div_ceil(m);
    let mut epoch_pool: Option<(Vec<usize>, Array2<f64>)> = None;

    let started = Instant::now();
    let mut log = Vec::with_capacity(cfg.max_iterations);
    let mut final_loss = f64::NAN;
    let mut iterations_run = 0;

    for iter in 0..cfg.max_iterations {
        let (rows, labels, loss_out): (Vec<usize>, Vec<u32>, LossOutput);
        let spec_opt: Option<LossSpec>;
        match cfg.loss {
            LossKind::Contrastive => {
                let (r, l, s) = contrastive_batch(train_set, m, &mut rng)?;
                rows = r;
                labels = l;
                spec_opt = Some(s);
            }
            LossKind::Triplet => {
                let (r, l, s) = triplet_batch(train_set, m, &mut rng)?;
                rows = r;
                labels = l;
                spec_opt = Some(s);
            }
            LossKind::LiftedSmooth | LossKind::LiftedNonsmooth => {
                let batch_seed = rng.gen::<u64>();
                let mut plan = plan_random_batch(train_set, &mining_cfg, batch_seed)?;
                if cfg.mining_mode == MiningMode::PoolMined {
                    if iter % epoch_len == 0 || epoch_pool.is_none() {
                        let mut idx: Vec<usize> = (0..train_set.len()).collect();
                        for i in (1..idx.len()).rev() {
                            let j = rng.gen_range(0..=i);
                            idx.swap(i, j);
                        }
                        idx.truncate(mining_cfg.candidate_pool_size);
                        idx.sort_unstable();
                        let emb = model.embed(&train_set.gather(&idx))?;
                        epoch_pool = Some((idx, emb));
                    }
                    let (pool_idx, pool_emb) = epoch_pool.as_ref().unwrap();
                    // Batch members missing from the stale pool are appended
                    // with current-model embeddings.
                    let mut idx = pool_idx.clone();
                    let mut emb = pool_emb.clone();
                    let missing: Vec<usize> = plan
                        .member_indices
                        .iter()
                        .filter(|r| !idx.contains(r))
                        .cloned()
                        .collect();
                    if !missing.is_empty() {
                        let extra = model.embed(&train_set.gather(&missing))?;
                        let mut stacked =
                            Array2::zeros((emb.nrows() + extra.nrows(), emb.ncols()));
                        stacked
                            .slice_mut(ndarray::s![..emb.nrows(), ..])
                            .assign(&emb);
                        stacked
                            .slice_mut(ndarray::s![emb.nrows().., ..])
                            .assign(&extra);
                        idx.extend(missing);
                        emb = stacked;
                    }
                    let pool = CandidatePool::new(idx, emb)?;
                    plan = mine_hard_negatives(&plan, train_set, &pool, &mining_cfg)?;
                }
                rows = plan.member_indices.clone();
                labels = train_set.gather_labels(&rows);
                spec_opt = None;
            }
        }

        let features = train_set.gather(&rows);
        let cache = model.forward(&features)?;
        let batch = EmbeddingBatch::new(cache.output().clone(), labels)?;
        loss_out = match &spec_opt {
            Some(spec) => spec.evaluate(&batch, &loss_cfg)?,
            None => lifted_loss_for(cfg.loss, &batch, cfg, &loss_cfg, &mut rng)?,
        };
        if !loss_out.value.is_finite() {
            return Err(Error::NonFiniteLoss { iteration: iter });
        }
        let grads = model.backward(&cache, &loss_out.grad)?;
        sgd_step(&mut model, &grads, &opt_cfg, &mut opt_state)?;

        log.push(LogRow {
            iter,
            loss: loss_out.value,
            wall_ms: cfg
                .log_wall_time
                .then(|| started.elapsed().as_secs_f64() * 1e3),
        });
        final_loss = loss_out.value;
        iterations_run = iter + 1;
        if cfg.loss_floor > 0.0 && loss_out.value < cfg.loss_floor {
            break;
        }
    }
    Ok((
        model,
        TrainOutcome {
            final_loss,
            iterations_run,
            log,
        },
    ))
}
