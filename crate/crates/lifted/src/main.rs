//! Thin command-line front end: dataset synthesis, training, evaluation, and
//! gradient checking, all driven by seeds and a flat key-value config.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lifted::data::{load_dataset, save_dataset_csv, DatasetFormat};
use lifted::eval::{kmeans, nmi, pairwise_f1, recall_at_k, EvalReport};
use lifted::loss::LossConfig;
use lifted::model::{random_check_instance, GradCheckConfig, GradCheckStatus, Mlp};
use lifted::{
    class_disjoint_split, make_blobs, train, Error, LabeledDataset, LossKind, Result, RunConfig,
    SplitSpec,
};

#[derive(Parser)]
#[command(name = "lifted", version, about = "Metric-learning embeddings with a lifted structured loss")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic Gaussian-blob dataset as headerless CSV.
    Synth(SynthArgs),
    /// Train an embedding network; write a checkpoint and a loss log.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the test split: Recall@K, NMI, pairwise F1.
    Eval(EvalArgs),
    /// Verify analytic gradients against central finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    classes: usize,
    #[arg(long)]
    per_class: usize,
    #[arg(long)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Class centers are drawn uniformly from [-center-scale, center-scale]^dim.
    #[arg(long, default_value_t = 2.0)]
    center_scale: f64,
    /// Isotropic Gaussian noise around each class center.
    #[arg(long, default_value_t = 0.5)]
    noise_sigma: f64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

/// Config sources shared by train and eval: defaults, then an optional config
/// file, then any number of `--set key=value` overrides.
#[derive(Args)]
struct ConfigArgs {
    /// Flat key-value config file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. `--set loss=triplet`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        for item in &self.overrides {
            let (key, value) = item.split_once('=').ok_or_else(|| {
                Error::Config(format!("--set expects KEY=VALUE, got `{item}`"))
            })?;
            cfg.apply_kv(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset file (.csv, or .jsonl/.ndjson for JSON lines).
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    /// Output checkpoint path.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Output training-log CSV path.
    #[arg(long)]
    log: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Dataset file; the class-disjoint test split is evaluated.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    checkpoint: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    /// Output path for the JSON report.
    #[arg(long)]
    report: PathBuf,
    /// Optional output path for the recall-curve CSV (`k,score`).
    #[arg(long)]
    curve: Option<PathBuf>,
    /// Evaluate the whole dataset instead of only the test split.
    #[arg(long)]
    no_split: bool,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Restrict to one loss; all four are checked by default.
    #[arg(long)]
    loss: Option<LossKind>,
    /// Random batches per loss.
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 1e-5)]
    tolerance: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn split_for_eval(dataset: &LabeledDataset, cfg: &RunConfig) -> Result<(LabeledDataset, LabeledDataset)> {
    let spec = SplitSpec {
        train_fraction_of_classes: cfg.train_fraction,
        ..Default::default()
    };
    class_disjoint_split(dataset, &spec)
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let ds = make_blobs(
        args.classes,
        args.per_class,
        args.dim,
        args.center_scale,
        args.noise_sigma,
        args.seed,
    )?;
    save_dataset_csv(&ds, &args.out)?;
    println!(
        "wrote {} rows ({} classes x {} points, dim {}) to {}",
        ds.len(),
        args.classes,
        args.per_class,
        args.dim,
        args.out.display()
    );
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    let dataset = load_dataset(&args.data, DatasetFormat::from_path(&args.data))?;
    let (train_set, _) = split_for_eval(&dataset, &cfg)?;
    let (model, outcome) = train(&cfg, &train_set)?;
    model.save(&args.checkpoint)?;
    std::fs::write(&args.log, outcome.log_csv())?;
    println!(
        "trained {} iterations on {} rows; final loss {}; checkpoint {}",
        outcome.iterations_run,
        train_set.len(),
        outcome.final_loss,
        args.checkpoint.display()
    );
    Ok(())
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let cfg = args.config.resolve()?;
    let dataset = load_dataset(&args.data, DatasetFormat::from_path(&args.data))?;
    let test_set = if args.no_split {
        dataset
    } else {
        split_for_eval(&dataset, &cfg)?.1
    };
    let model = Mlp::load(&args.checkpoint)?;
    if model.spec().input_dim() != test_set.dim() {
        return Err(Error::Checkpoint(format!(
            "checkpoint expects input dim {}, dataset has dim {}",
            model.spec().input_dim(),
            test_set.dim()
        )));
    }
    let embeddings = model.embed(test_set.features())?;
    let k_clusters = test_set.num_classes();
    let clustering = kmeans(&embeddings, k_clusters, cfg.sampler_seed, 300)?;
    let report = EvalReport {
        recall_at: recall_at_k(&embeddings, test_set.labels(), &cfg.eval_ks)?,
        nmi: nmi(&clustering, test_set.labels())?,
        f1: pairwise_f1(&clustering, test_set.labels())?,
        empty_clusters: clustering.empty_clusters(),
        cluster_assignment: clustering.assignment().to_vec(),
        num_clusters: k_clusters,
        seed: cfg.sampler_seed,
        config: cfg.echo(),
    };
    std::fs::write(&args.report, report.to_json()?)?;
    if let Some(curve) = &args.curve {
        std::fs::write(curve, report.recall_curve_csv())?;
    }
    println!(
        "evaluated {} test rows: NMI {:.4}, F1 {:.4}, Recall@{} {:.4}",
        test_set.len(),
        report.nmi,
        report.f1,
        cfg.eval_ks[0],
        report.recall_at[&cfg.eval_ks[0]]
    );
    Ok(())
}

fn cmd_gradcheck(args: &GradcheckArgs) -> Result<()> {
    let losses: Vec<LossKind> = match args.loss {
        Some(kind) => vec![kind],
        None => LossKind::ALL.to_vec(),
    };
    let check_cfg = GradCheckConfig {
        tolerance: args.tolerance,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut failures = 0;
    for kind in losses {
        for trial in 0..args.trials {
            let (inputs, labels, spec) = random_check_instance(kind, 10, 4, &mut rng)?;
            let model = Mlp::init(lifted::MlpSpec::relu_net(
                vec![4, 8, 3],
                args.seed.wrapping_add(trial as u64),
            ))?;
            let report = lifted::gradient_check(
                &spec,
                &inputs,
                &labels,
                &model,
                &LossConfig::default(),
                &check_cfg,
            )?;
            let verdict = match report.status {
                GradCheckStatus::Pass => "pass",
                GradCheckStatus::Fail => "FAIL",
                GradCheckStatus::Inconclusive => "inconclusive",
            };
            println!(
                "{kind} trial {trial}: {verdict} (max rel err {:.3e}, retries {})",
                report.max_rel_err, report.retries
            );
            if report.status == GradCheckStatus::Fail {
                failures += 1;
            }
        }
    }
    if failures > 0 {
        return Err(Error::InvalidInput(format!(
            "{failures} gradient-check trials failed"
        )));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Gradcheck(args) => cmd_gradcheck(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
