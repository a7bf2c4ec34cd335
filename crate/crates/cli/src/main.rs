//! `cvent`: generate pattern datasets, augment them, train and evaluate the
//! classifier, and export grids for viewing.

mod inspect;
mod run;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cvent_core::cnn::{self, ClassifierModel, ModelConfig, TrainOptions};
use cvent_core::dataset::{build_dataset_with_progress, split_dataset, DatasetConfig, PartitionClass, PatternDataset};
use cvent_core::format::{read_dataset, write_dataset};
use cvent_core::homodyne::QuadGrid;
use cvent_core::qda::{augment_dataset, AugmentOp, AugmentationPlan};
use cvent_core::rng::{derive_seed, tags};
use cvent_core::stellar::SeedBounds;

use run::{AugmentRun, EvalRun, GenRun, InspectRun, RunConfig, SplitRun, TrainRun};

#[derive(Parser)]
#[command(name = "cvent", version, about = "Entanglement-structure classification from homodyne correlation patterns")]
struct Cli {
    /// Worker threads for generation, augmentation and evaluation.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Read the resolved run config from this JSON file instead of the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a class-balanced dataset of pattern sets.
    GenDataset(GenArgs),
    /// Stratified split into two files.
    Split(SplitArgs),
    /// Enlarge a dataset with label-preserving transforms.
    Augment(AugmentArgs),
    /// Train a classifier and write the model and its report.
    Train(TrainArgs),
    /// Accuracy and confusion matrix of a model on a dataset.
    Eval(EvalArgs),
    /// Export the grids of one sample as CSV and PGM.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 3)]
    parties: usize,
    #[arg(long, default_value_t = 10)]
    per_class: usize,
    /// Samples per class in label order, overriding --per-class.
    #[arg(long, value_delimiter = ',')]
    class_counts: Option<Vec<usize>>,
    /// Fock cutoff per mode (default 10 for three parties, 7 for four).
    #[arg(long)]
    cutoff: Option<usize>,
    #[arg(long)]
    working_pad: Option<usize>,
    #[arg(long)]
    leak_tol: Option<f64>,
    #[arg(long)]
    nu_min: Option<f64>,
    #[arg(long)]
    max_rank: Option<usize>,
    #[arg(long)]
    s_max: Option<f64>,
    #[arg(long)]
    alpha_max: Option<f64>,
    #[arg(long)]
    eta_min: Option<f64>,
    #[arg(long)]
    eta_max: Option<f64>,
    #[arg(long, default_value_t = cvent_core::dataset::DEFAULT_K_MAX)]
    k_max: usize,
    #[arg(long, default_value_t = 24)]
    bins: usize,
    #[arg(long, default_value_t = -6.0, allow_hyphen_values = true)]
    x_min: f64,
    #[arg(long, default_value_t = 6.0)]
    x_max: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 0.8)]
    fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    first: Option<PathBuf>,
    #[arg(long)]
    second: Option<PathBuf>,
}

#[derive(Args)]
struct AugmentArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    factor: usize,
    /// Comma-separated subset of {permute, mix}.
    #[arg(long, value_delimiter = ',', default_value = "permute")]
    ops: Vec<String>,
    #[arg(long, default_value_t = 2)]
    mix_arity: usize,
    #[arg(long, default_value_t = 0.5)]
    mix_fraction: f64,
    /// Also mix structured classes that share one concrete partition.
    #[arg(long)]
    allow_partitioned_mixing: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    /// Single dataset to split into train and test parts.
    #[arg(long, conflicts_with = "train")]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 0.8)]
    train_fraction: f64,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    val: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    /// Share of the training originals held out for early stopping when no
    /// --val file is given; 0 disables early stopping.
    #[arg(long, default_value_t = 0.1)]
    val_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 64)]
    batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 10)]
    patience: usize,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    weight_sharing: bool,
    #[arg(long)]
    no_standardize: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Report path; the confusion CSV goes next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    index: usize,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn required(p: Option<PathBuf>, flag: &str) -> Result<PathBuf> {
    p.with_context(|| format!("missing --{flag}"))
}

fn resolve(cli: Cli) -> Result<RunConfig> {
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let rc: RunConfig = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let same = matches!(
            (&rc, &cli.command),
            (RunConfig::GenDataset(_), Command::GenDataset(_))
                | (RunConfig::Split(_), Command::Split(_))
                | (RunConfig::Augment(_), Command::Augment(_))
                | (RunConfig::Train(_), Command::Train(_))
                | (RunConfig::Eval(_), Command::Eval(_))
                | (RunConfig::Inspect(_), Command::Inspect(_))
        );
        if !same {
            bail!("{} holds a config for another command", path.display());
        }
        return Ok(rc);
    }
    Ok(match cli.command {
        Command::GenDataset(a) => {
            let mut dataset = DatasetConfig::balanced(a.parties, a.per_class, a.seed)?;
            if let Some(c) = a.class_counts {
                dataset.class_counts = c;
            }
            let s = &mut dataset.seed;
            s.cutoff = a.cutoff.unwrap_or(s.cutoff);
            s.working_pad = a.working_pad.unwrap_or(s.working_pad);
            s.leak_tol = a.leak_tol.unwrap_or(s.leak_tol);
            s.nu_min = a.nu_min.unwrap_or(s.nu_min);
            s.max_rank = a.max_rank.unwrap_or(s.max_rank);
            let b = s.bounds;
            s.bounds = SeedBounds {
                s_max: a.s_max.unwrap_or(b.s_max),
                alpha_max: a.alpha_max.unwrap_or(b.alpha_max),
                eta_min: a.eta_min.unwrap_or(b.eta_min),
                eta_max: a.eta_max.unwrap_or(b.eta_max),
            };
            dataset.k_max = a.k_max;
            dataset.grid = QuadGrid::new(a.bins, a.x_min, a.x_max)?;
            RunConfig::GenDataset(GenRun { dataset, out: required(a.out, "out")? })
        }
        Command::Split(a) => RunConfig::Split(SplitRun {
            input: required(a.input, "input")?,
            fraction: a.fraction,
            seed: a.seed,
            first: required(a.first, "first")?,
            second: required(a.second, "second")?,
        }),
        Command::Augment(a) => {
            let mut ops = Vec::new();
            for o in &a.ops {
                ops.push(match o.trim().to_ascii_lowercase().as_str() {
                    "permute" => AugmentOp::Permute,
                    "mix" | "convex-mix" | "convex_mix" => AugmentOp::ConvexMix,
                    other => bail!(cvent_core::Error::InvalidParameter(format!("unknown augmentation op {other:?}"))),
                });
            }
            ops.dedup();
            let plan = AugmentationPlan {
                ops,
                target_factor: a.factor,
                mix_arity: a.mix_arity,
                mix_fraction: a.mix_fraction,
                allow_partitioned_mixing: a.allow_partitioned_mixing,
                rng_seed: a.seed,
            };
            RunConfig::Augment(AugmentRun { input: required(a.input, "input")?, out: required(a.out, "out")?, plan })
        }
        Command::Train(a) => {
            if a.data.is_none() && a.train.is_none() {
                bail!(cvent_core::Error::InvalidParameter("give --data or --train".into()));
            }
            let options = TrainOptions {
                lr: a.lr,
                batch_size: a.batch,
                max_epochs: a.epochs,
                patience: a.patience,
                shuffle_seed: a.seed,
                max_steps: a.max_steps,
                ..TrainOptions::default()
            };
            RunConfig::Train(TrainRun {
                data: a.data,
                train_fraction: a.train_fraction,
                train: a.train,
                val: a.val,
                test: a.test,
                val_fraction: a.val_fraction,
                seed: a.seed,
                weight_sharing: a.weight_sharing,
                standardize: !a.no_standardize,
                options,
                out: required(a.out, "out")?,
            })
        }
        Command::Eval(a) => RunConfig::Eval(EvalRun { model: required(a.model, "model")?, data: required(a.data, "data")?, out: a.out }),
        Command::Inspect(a) => RunConfig::Inspect(InspectRun { data: required(a.data, "data")?, index: a.index, out_dir: required(a.out_dir, "out-dir")? }),
    })
}

fn class_summary(ds: &PatternDataset) -> String {
    let names = PartitionClass::all(ds.parties).map(|c| c.iter().map(|c| c.name()).collect::<Vec<_>>()).unwrap_or_default();
    names.iter().zip(ds.class_counts()).map(|(n, c)| format!("{n}={c}")).collect::<Vec<_>>().join(" ")
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    std::fs::write(path, serde_json::to_vec_pretty(value)?).with_context(|| format!("writing {}", path.display()))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn execute(rc: &RunConfig) -> Result<()> {
    println!("config hash: {}", rc.hash());
    match rc {
        RunConfig::GenDataset(r) => {
            let total: usize = r.dataset.class_counts.iter().sum();
            let step = (total / 20).max(1);
            let done = std::sync::atomic::AtomicUsize::new(0);
            let ds = build_dataset_with_progress(&r.dataset, |_| {
                let d = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
                if d % step == 0 || d == total {
                    eprintln!("generated {d}/{total}");
                }
            })?;
            write_dataset(&ds, &r.out)?;
            rc.write_next_to(&r.out)?;
            let st = ds.stats();
            println!("wrote {} samples to {}", ds.len(), r.out.display());
            println!("class counts: {}", class_summary(&ds));
            println!("rejected seeds: {}  circuit retries: {}  low-mass samples: {}", st.rejected_seeds, st.circuit_retries, st.low_mass_samples);
        }
        RunConfig::Split(r) => {
            let ds = read_dataset(&r.input)?;
            let (a, b) = split_dataset(&ds, r.fraction, r.seed)?;
            write_dataset(&a, &r.first)?;
            write_dataset(&b, &r.second)?;
            rc.write_next_to(&r.first)?;
            println!("{}: {} ({})", r.first.display(), a.len(), class_summary(&a));
            println!("{}: {} ({})", r.second.display(), b.len(), class_summary(&b));
        }
        RunConfig::Augment(r) => {
            let ds = read_dataset(&r.input)?;
            let out = augment_dataset(&ds, &r.plan)?;
            write_dataset(&out, &r.out)?;
            rc.write_next_to(&r.out)?;
            println!("augmented {} -> {} samples ({})", ds.len(), out.len(), class_summary(&out));
        }
        RunConfig::Train(r) => train(rc, r)?,
        RunConfig::Eval(r) => {
            let model = ClassifierModel::load(&r.model)?;
            let ds = read_dataset(&r.data)?;
            let report = cnn::evaluate(&model, &ds)?;
            let out = r.out.clone().unwrap_or_else(|| with_suffix(&r.model, ".eval.json"));
            write_json(&out, &report)?;
            std::fs::write(with_suffix(&out, ".confusion.csv"), report.confusion_csv())?;
            rc.write_next_to(&out)?;
            println!("accuracy {:.4} on {} samples", report.accuracy, report.n_samples);
            print!("{}", report.confusion_csv());
        }
        RunConfig::Inspect(r) => {
            let ds = read_dataset(&r.data)?;
            let files = inspect::export(&ds, r.index, &r.out_dir)?;
            rc.write_next_to(&r.out_dir.join("inspect"))?;
            println!("wrote {} grids to {}", files, r.out_dir.display());
        }
    }
    Ok(())
}

fn train(rc: &RunConfig, r: &TrainRun) -> Result<()> {
    let (train_ds, mut test_ds) = match (&r.data, &r.train) {
        (Some(d), _) => {
            let ds = read_dataset(d)?;
            let (a, b) = split_dataset(&ds, r.train_fraction, derive_seed(r.seed, tags::SPLIT, 0))?;
            (a, Some(b))
        }
        (None, Some(t)) => (read_dataset(t)?, None),
        (None, None) => bail!(cvent_core::Error::InvalidParameter("give --data or --train".into())),
    };
    if let Some(t) = &r.test {
        test_ds = Some(read_dataset(t)?);
    }
    let (fit_ds, val_ds) = match &r.val {
        Some(v) => (train_ds, Some(read_dataset(v)?)),
        None if r.val_fraction > 0.0 => {
            let (v, f) = split_dataset(&train_ds, r.val_fraction, derive_seed(r.seed, tags::SPLIT, 1))?;
            (f, Some(v))
        }
        None => (train_ds, None),
    };
    let config = ModelConfig { weight_sharing: r.weight_sharing, standardize: r.standardize, ..ModelConfig::new(fit_ds.parties, r.seed) };
    let model = ClassifierModel::new(config)?;
    println!(
        "training on {} samples ({}), validating on {}",
        fit_ds.len(),
        class_summary(&fit_ds),
        val_ds.as_ref().map_or(0, PatternDataset::len)
    );
    let (model, mut report) = cnn::train(model, &fit_ds, val_ds.as_ref(), &r.options, |e| {
        let val = match (e.val_loss, e.val_accuracy) {
            (Some(l), Some(a)) => format!("  val loss {l:.4} acc {a:.4}"),
            _ => String::new(),
        };
        eprintln!("epoch {:3}  train loss {:.4} acc {:.4}{val}", e.epoch, e.train_loss, e.train_accuracy);
    })?;
    if let Some(t) = &test_ds {
        let ev = cnn::evaluate(&model, t)?;
        println!("test accuracy {:.4} on {} samples", ev.accuracy, ev.n_samples);
        print!("{}", ev.confusion_csv());
        std::fs::write(with_suffix(&r.out, ".confusion.csv"), ev.confusion_csv())?;
        report.test = Some(ev);
    }
    model.save(&r.out)?;
    write_json(&with_suffix(&r.out, ".report.json"), &report)?;
    rc.write_next_to(&r.out)?;
    println!("best epoch {} of {}; model written to {}", report.best_epoch, report.epochs.len(), r.out.display());
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use cvent_core::Error as E;
    match err.chain().find_map(|e| e.downcast_ref::<E>()) {
        Some(E::Generation(_) | E::TruncationOverflow { .. } | E::BudgetExceeded { .. }) => 3,
        Some(E::Numerical(_) | E::InvalidChannel { .. }) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match resolve(cli).and_then(|rc| execute(&rc)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
