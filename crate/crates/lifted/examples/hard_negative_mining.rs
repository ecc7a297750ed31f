//! Shows batch construction with hard-negative mining: a random positive-pair
//! batch is augmented with each pair element's nearest different-class
//! neighbors from a candidate pool, evicting easy members to stay at size.
//!
//! Run with `cargo run --example hard_negative_mining`.

use lifted::sampler::{
    mine_hard_negatives, plan_random_batch, CandidatePool, MiningConfig, MiningMode,
};
use lifted::{make_blobs, Mlp, MlpSpec};

fn main() -> lifted::Result<()> {
    let dataset = make_blobs(10, 12, 6, 1.5, 0.5, 3)?;
    let cfg = MiningConfig {
        batch_size: 16,
        negatives_per_positive_element: 2,
        candidate_pool_size: 64,
        mode: MiningMode::PoolMined,
    };

    let plan = plan_random_batch(&dataset, &cfg, 11)?;
    println!(
        "random batch: {} members, {} positive pairs",
        plan.member_indices.len(),
        plan.positive_pairs.len()
    );

    // Mining ranks candidates by distance in the current embedding space;
    // here an untrained network stands in for a training-time snapshot.
    let model = Mlp::init(MlpSpec::relu_net(vec![6, 8, 4], 0))?;
    // The pool must cover the batch members; take the first rows and add any
    // batch member not already present.
    let mut pool_indices: Vec<usize> = (0..cfg.candidate_pool_size).collect();
    for &m in &plan.member_indices {
        if !pool_indices.contains(&m) {
            pool_indices.push(m);
        }
    }
    let pool_embeddings = model.embed(&dataset.gather(&pool_indices))?;
    let pool = CandidatePool::new(pool_indices, pool_embeddings)?;

    let mined = mine_hard_negatives(&plan, &dataset, &pool, &cfg)?;
    println!(
        "mined batch:  {} members, {} positive pairs",
        mined.member_indices.len(),
        mined.positive_pairs.len()
    );
    let swapped = mined
        .member_indices
        .iter()
        .filter(|i| !plan.member_indices.contains(i))
        .count();
    println!("{swapped} members swapped in as hard negatives");
    Ok(())
}
