//! Mini-batch construction: random positive-pair sampling, balanced negative
//! subsampling, and hard-negative mining against a candidate pool.

use std::collections::{BTreeMap, BTreeSet};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::batch::PairSets;
use crate::data::LabeledDataset;
use crate::error::{Error, Result};

/// One planned mini-batch: which dataset rows participate and which in-batch
/// index pairs are positive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchPlan {
    /// Distinct dataset row indices forming the batch.
    pub member_indices: Vec<usize>,
    /// Positive pairs as indices into `member_indices`.
    pub positive_pairs: Vec<(usize, usize)>,
    /// RNG seed the plan was built from.
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MiningMode {
    /// No explicit mining; the lifted loss already consumes every in-batch
    /// negative.
    WithinBatch,
    /// Augment each planned batch with mined neighbors from a candidate pool.
    PoolMined,
}

impl MiningMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            MiningMode::WithinBatch => "within-batch",
            MiningMode::PoolMined => "pool-mined",
        }
    }
}

impl std::str::FromStr for MiningMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "within-batch" => Ok(MiningMode::WithinBatch),
            "pool-mined" => Ok(MiningMode::PoolMined),
            other => Err(Error::Config(format!(
                "unknown mining mode `{other}` (expected within-batch, pool-mined)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MiningConfig {
    pub batch_size: usize,
    /// Nearest different-class neighbors mined per positive-pair element.
    pub negatives_per_positive_element: usize,
    pub candidate_pool_size: usize,
    pub mode: MiningMode,
}

impl Default for MiningConfig {
    fn default() -> Self {
        Self {
            batch_size: 128,
            negatives_per_positive_element: 1,
            candidate_pool_size: 256,
            mode: MiningMode::WithinBatch,
        }
    }
}

impl MiningConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size < 4 {
            return Err(Error::Config("batch_size must be >= 4".into()));
        }
        if self.negatives_per_positive_element == 0 {
            return Err(Error::Config(
                "negatives_per_positive_element must be >= 1".into(),
            ));
        }
        if self.candidate_pool_size < self.batch_size {
            return Err(Error::Config(
                "candidate_pool_size must be >= batch_size".into(),
            ));
        }
        Ok(())
    }
}

/// Current-model embeddings for a set of dataset rows, used as the mining
/// pool.
#[derive(Debug, Clone)]
pub struct CandidatePool {
    /// Dataset rows present in the pool.
    pub indices: Vec<usize>,
    /// Embedding per pool entry, row-aligned with `indices`.
    pub embeddings: Array2<f64>,
}

impl CandidatePool {
    pub fn new(indices: Vec<usize>, embeddings: Array2<f64>) -> Result<Self> {
        if indices.len() != embeddings.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "{} pool indices for {} embedding rows",
                indices.len(),
                embeddings.nrows()
            )));
        }
        Ok(Self {
            indices,
            embeddings,
        })
    }
}

fn enumerate_positive_pairs(labels: &[u32]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..labels.len() {
        for j in (i + 1)..labels.len() {
            if labels[i] == labels[j] {
                out.push((i, j));
            }
        }
    }
    out
}

/// Samples random positive pairs and then enumerates every in-batch positive
/// pair exhaustively. Guarantees at least two distinct classes so each
/// positive pair has an incident in-batch negative.
///
/// In within-batch mode the sampled pairs fill the whole batch; in pool-mined
/// mode they fill only half of it, reserving the rest for mined hard
/// negatives.
pub fn plan_random_batch(
    dataset: &LabeledDataset,
    cfg: &MiningConfig,
    seed: u64,
) -> Result<BatchPlan> {
    cfg.validate()?;
    if dataset.num_classes() < 2 {
        return Err(Error::InvalidInput(
            "batch planning requires at least 2 classes (no negatives otherwise)".into(),
        ));
    }
    let pairable: Vec<u32> = dataset
        .class_index()
        .iter()
        .filter(|(_, rows)| rows.len() >= 2)
        .map(|(&c, _)| c)
        .collect();
    if pairable.is_empty() {
        return Err(Error::InvalidInput(
            "no class has 2 or more examples; cannot form a positive pair".into(),
        ));
    }
    let pair_budget = match cfg.mode {
        MiningMode::WithinBatch => cfg.batch_size,
        MiningMode::PoolMined => (cfg.batch_size / 2).max(2),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut members: Vec<usize> = Vec::new();
    let mut member_set = BTreeSet::new();
    let mut attempts = 0usize;
    let max_attempts = 50 * cfg.batch_size;
    while members.len() + 2 <= pair_budget && attempts < max_attempts {
        attempts += 1;
        let class = pairable[rng.gen_range(0..pairable.len())];
        let rows = &dataset.class_index()[&class];
        let a = rows[rng.gen_range(0..rows.len())];
        let b = rows[rng.gen_range(0..rows.len())];
        if a == b {
            continue;
        }
        for r in [a, b] {
            if member_set.insert(r) {
                members.push(r);
            }
        }
    }

    // Force a second class into the batch if sampling collapsed onto one.
    let classes_present: BTreeSet<u32> = members.iter().map(|&r| dataset.labels()[r]).collect();
    if classes_present.len() < 2 {
        let &only = classes_present.iter().next().ok_or_else(|| {
            Error::InvalidInput("failed to sample any positive pair".into())
        })?;
        let other_rows: Vec<usize> = dataset
            .class_index()
            .iter()
            .filter(|(&c, _)| c != only)
            .flat_map(|(_, rows)| rows.iter().cloned())
            .collect();
        while members.len() >= cfg.batch_size {
            let removed = members.pop().unwrap();
            member_set.remove(&removed);
        }
        let pick = other_rows[rng.gen_range(0..other_rows.len())];
        if member_set.insert(pick) {
            members.push(pick);
        }
    }

    let labels: Vec<u32> = members.iter().map(|&r| dataset.labels()[r]).collect();
    let positive_pairs = enumerate_positive_pairs(&labels);
    if positive_pairs.is_empty() {
        return Err(Error::InvalidInput(
            "failed to sample any positive pair".into(),
        ));
    }
    Ok(BatchPlan {
        member_indices: members,
        positive_pairs,
        seed,
    })
}

/// For each element of each positive pair, finds the `k` nearest
/// different-class pool entries by embedding distance and appends them to the
/// batch, hardest (closest) first, deduplicated, capped at `batch_size`.
///
/// When the batch is full, members that belong to no positive pair are
/// evicted to make room; once none remain, mining stops. Positive pairs are
/// re-enumerated over the final member list.
pub fn mine_hard_negatives(
    plan: &BatchPlan,
    dataset: &LabeledDataset,
    pool: &CandidatePool,
    cfg: &MiningConfig,
) -> Result<BatchPlan> {
    cfg.validate()?;
    let pool_pos: BTreeMap<usize, usize> = pool
        .indices
        .iter()
        .enumerate()
        .map(|(p, &row)| (row, p))
        .collect();

    // Collect (distance, dataset_row) candidates over all pair elements.
    let mut mined: BTreeMap<usize, f64> = BTreeMap::new();
    for &(pi, pj) in &plan.positive_pairs {
        for member_slot in [pi, pj] {
            let element_row = plan.member_indices[member_slot];
            let element_label = dataset.labels()[element_row];
            let &element_pool = pool_pos.get(&element_row).ok_or_else(|| {
                Error::InvalidInput(format!(
                    "positive-pair element (dataset row {element_row}) is not in the candidate pool"
                ))
            })?;
            let mut candidates: Vec<(f64, usize)> = Vec::new();
            for (p, &row) in pool.indices.iter().enumerate() {
                if dataset.labels()[row] == element_label {
                    continue;
                }
                let mut sq = 0.0;
                for c in 0..pool.embeddings.ncols() {
                    let d = pool.embeddings[[p, c]] - pool.embeddings[[element_pool, c]];
                    sq += d * d;
                }
                candidates.push((sq, row));
            }
            if candidates.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "candidate pool contains no example with a class different from row {element_row}"
                )));
            }
            candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            for &(sq, row) in candidates
                .iter()
                .take(cfg.negatives_per_positive_element)
            {
                let entry = mined.entry(row).or_insert(f64::INFINITY);
                if sq < *entry {
                    *entry = sq;
                }
            }
        }
    }

    let mut members = plan.member_indices.clone();
    let member_set: BTreeSet<usize> = members.iter().cloned().collect();
    let in_positive_pair: BTreeSet<usize> = plan
        .positive_pairs
        .iter()
        .flat_map(|&(a, b)| [plan.member_indices[a], plan.member_indices[b]])
        .collect();

    let mut ordered: Vec<(f64, usize)> = mined
        .into_iter()
        .filter(|(row, _)| !member_set.contains(row))
        .map(|(row, sq)| (sq, row))
        .collect();
    ordered.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));

    for (_, row) in ordered {
        if members.len() < cfg.batch_size {
            members.push(row);
        } else if let Some(evict) = members
            .iter()
            .rposition(|r| !in_positive_pair.contains(r))
        {
            members.remove(evict);
            members.push(row);
        } else {
            break;
        }
    }

    let labels: Vec<u32> = members.iter().map(|&r| dataset.labels()[r]).collect();
    let positive_pairs = enumerate_positive_pairs(&labels);
    Ok(BatchPlan {
        member_indices: members,
        positive_pairs,
        seed: plan.seed,
    })
}

/// Uniform subsample of the negative pairs down to `min(|N|, |P|)`, repaired
/// so every positive pair keeps at least one incident negative.
pub fn subsample_negative_pairs(pairs: &PairSets, rng: &mut impl Rng) -> PairSets {
    let target = pairs.positives.len().min(pairs.negatives.len());
    let mut selected: Vec<(usize, usize)> = pairs.negatives.clone();
    // Partial Fisher-Yates: the first `target` entries are a uniform draw
    // without replacement.
    for i in 0..target {
        let j = rng.gen_range(i..selected.len());
        selected.swap(i, j);
    }
    selected.truncate(target);

    let incident = |set: &[(usize, usize)], i: usize, j: usize| {
        set.iter()
            .any(|&(a, b)| a == i || b == i || a == j || b == j)
    };
    for &(pi, pj) in &pairs.positives {
        if incident(&selected, pi, pj) {
            continue;
        }
        // Pull in a random incident negative from the full set.
        let candidates: Vec<(usize, usize)> = pairs
            .negatives
            .iter()
            .filter(|&&(a, b)| a == pi || b == pi || a == pj || b == pj)
            .cloned()
            .collect();
        if candidates.is_empty() {
            continue; // the loss itself reports this pair
        }
        let add = candidates[rng.gen_range(0..candidates.len())];
        // Swap out a selected negative whose removal keeps every positive
        // pair already satisfied covered.
        let removable = (0..selected.len()).find(|&idx| {
            let mut trial = selected.clone();
            trial.remove(idx);
            trial.push(add);
            pairs
                .positives
                .iter()
                .take_while(|&&p| p != (pi, pj))
                .chain(std::iter::once(&(pi, pj)))
                .all(|&(a, b)| incident(&trial, a, b))
        });
        match removable {
            Some(idx) => {
                selected.remove(idx);
                selected.push(add);
            }
            None => selected.push(add), // degenerate; exceed target rather than starve a pair
        }
    }
    PairSets {
        positives: pairs.positives.clone(),
        negatives: selected,
    }
}
