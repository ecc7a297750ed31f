//! Verifies the analytic gradients of every loss against central finite
//! differences, end to end through a small MLP.
//!
//! Run with `cargo run --example gradient_check`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lifted::loss::LossConfig;
use lifted::model::{random_check_instance, GradCheckStatus};
use lifted::{gradient_check, GradCheckConfig, LossKind, Mlp, MlpSpec};

fn main() -> lifted::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cfg = GradCheckConfig::default();
    for kind in LossKind::ALL {
        let (inputs, labels, spec) = random_check_instance(kind, 10, 4, &mut rng)?;
        let model = Mlp::init(MlpSpec::relu_net(vec![4, 8, 3], 99))?;
        let report = gradient_check(&spec, &inputs, &labels, &model, &LossConfig::default(), &cfg)?;
        println!(
            "{kind}: {:?} (max relative error {:.3e}, {} jitter retries)",
            report.status, report.max_rel_err, report.retries
        );
        for block in &report.blocks {
            println!("  {:<16} {:.3e}", block.name, block.max_rel_err);
        }
        assert_ne!(report.status, GradCheckStatus::Fail);
    }
    Ok(())
}
