//! End-to-end library usage: synthesize blobs, split by class, train the
//! smooth lifted loss, and score the unseen-class test split.
//!
//! Run with `cargo run --example train_and_eval`.

use lifted::eval::{kmeans, nmi, pairwise_f1, recall_at_k};
use lifted::{class_disjoint_split, make_blobs, train, LossKind, RunConfig, SplitSpec};

fn main() -> lifted::Result<()> {
    let dataset = make_blobs(20, 15, 8, 1.5, 0.5, 42)?;
    let (train_set, test_set) = class_disjoint_split(&dataset, &SplitSpec::default())?;
    println!(
        "train: {} rows / {} classes; test: {} rows / {} classes (disjoint)",
        train_set.len(),
        train_set.num_classes(),
        test_set.len(),
        test_set.num_classes()
    );

    let cfg = RunConfig {
        loss: LossKind::LiftedSmooth,
        batch_size: Some(32),
        embedding_dim: 4,
        hidden_widths: vec![16],
        max_iterations: 1000,
        candidate_pool_size: 64,
        learning_rate: 0.02,
        ..Default::default()
    };
    let (model, outcome) = train(&cfg, &train_set)?;
    println!(
        "trained {} iterations, final loss {:.6}",
        outcome.iterations_run, outcome.final_loss
    );

    let emb = model.embed(test_set.features())?;
    let recall = recall_at_k(&emb, test_set.labels(), &cfg.eval_ks)?;
    let clustering = kmeans(&emb, test_set.num_classes(), 0, 300)?;
    println!(
        "test NMI {:.4}, pairwise F1 {:.4}",
        nmi(&clustering, test_set.labels())?,
        pairwise_f1(&clustering, test_set.labels())?
    );
    for (k, score) in &recall {
        println!("Recall@{k} = {score:.4}");
    }
    Ok(())
}
