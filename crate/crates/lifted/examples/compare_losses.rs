//! Evaluates all four losses on the same embedding batch, illustrating the
//! smooth loss's upper bound on the nonsmooth one and the different batch
//! structures each loss consumes.
//!
//! Run with `cargo run --example compare_losses`.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lifted::loss::{
    contrastive_loss, lifted_loss_nonsmooth, lifted_loss_smooth, triplet_loss, LossConfig,
    TripletBatch,
};
use lifted::EmbeddingBatch;

fn main() -> lifted::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    // Six points, three classes of two; spread them until the batch is only
    // partially separated so every loss has active terms.
    let features = Array2::from_shape_fn((6, 2), |_| rng.gen_range(-1.0..1.0));
    let labels = vec![0, 0, 1, 1, 2, 2];
    let batch = EmbeddingBatch::new(features, labels)?;
    let cfg = LossConfig::default();

    // The lifted losses consume the whole batch: every positive pair against
    // every incident negative pair.
    let smooth = lifted_loss_smooth(&batch, &cfg)?;
    let nonsmooth = lifted_loss_nonsmooth(&batch, &cfg)?;
    println!("lifted-smooth    = {:.6}", smooth.value);
    println!("lifted-nonsmooth = {:.6}  (always <= smooth)", nonsmooth.value);
    assert!(smooth.value >= nonsmooth.value);

    // Contrastive sees disjoint sampled pairs: here one positive pair per
    // class alternating with nothing left over for negatives.
    let pairing = vec![(0, 1, true), (2, 3, true), (4, 5, true)];
    let contrastive = contrastive_loss(&batch, &pairing, &cfg)?;
    println!("contrastive      = {:.6}  (3 positive pairs)", contrastive.value);

    // Triplet sees anchor/positive/negative triples.
    let triplets = TripletBatch::new(vec![0, 2], vec![1, 3], vec![2, 4])?;
    let triplet = triplet_loss(&batch, &triplets, &cfg)?;
    println!("triplet          = {:.6}  (2 triplets)", triplet.value);

    // Gradients come back per embedding row, ready to chain into a network.
    println!(
        "lifted-smooth gradient norm = {:.6}",
        smooth.grad.iter().map(|g| g * g).sum::<f64>().sqrt()
    );
    Ok(())
}
