//! Command-line interface.
//!
//! Exit codes: 0 success, 1 other failure, 2 usage or configuration error,
//! 3 data error, 4 numerical failure (non-finite loss).

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::checkpoint::Checkpoint;
use crate::data::export::{prediction_grid, save_png, write_dump};
use crate::data::fetch::{fetch_data, mnist_checksums};
use crate::data::{MovingMnist, StreamKind, VideoSequence};
use crate::error::{Error, Result};
use crate::model::{BnMode, ModelConfig, Variant, Vln};
use crate::train::eval::{evaluate_batch, evaluate_stream, Constant, CopyLast, Oracle, Predictor};
use crate::train::metrics::{write_csv, MetricsRecord};
use crate::train::run::{
    best_checkpoint_path, epoch_checkpoint_path, latest_epoch, load_model, train_run, write_manifest, RunConfig,
    RunOptions, MANIFEST, METRICS,
};
use crate::train::TrainConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

pub const DEFAULT_DATA_DIR: &str = "data/mnist";
pub const DATA_DIR_ENV: &str = "VLN_DATA_DIR";

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) => EXIT_USAGE,
        Error::Data(_) | Error::Checksum { .. } => EXIT_DATA,
        Error::Numerical(_) => EXIT_NUMERICAL,
        _ => EXIT_OTHER,
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "vln",
    version,
    about = "Video ladder networks for Moving MNIST next-frame prediction"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Install and checksum-verify the four MNIST IDX files.
    FetchData(FetchArgs),
    /// Dump generated sequences (binary dump plus optional PNG grids).
    Generate(GenerateArgs),
    /// Train a model.
    Train(TrainArgs),
    /// Evaluate a checkpoint or a built-in baseline on the test stream.
    Eval(EvalArgs),
    /// Render ground truth and predictions of selected sequences as PNG grids.
    Predict(PredictArgs),
    /// List every parameter name, shape and the total count.
    Describe(DescribeArgs),
}

#[derive(Debug, Args)]
pub struct FetchArgs {
    /// Directory holding the raw (uncompressed) IDX files to install.
    #[arg(long)]
    pub source: Option<PathBuf>,
    /// Destination data directory.
    #[arg(long, default_value = DEFAULT_DATA_DIR)]
    pub dest: PathBuf,
}

/// Model and training configuration shared by several subcommands.
#[derive(Debug, Args, Clone)]
pub struct ConfigArgs {
    /// TOML file with [model] and [train] tables.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Model variant when no config file is given: vln, vln-resnet, vln-bl, vln-bl-ff.
    #[arg(long, default_value = "vln")]
    pub variant: String,
    /// Override a config value, e.g. --set train.batch_size=8 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Dataset and split seed (train.seed) [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// MNIST directory [default: $VLN_DATA_DIR or data/mnist]
    #[arg(long)]
    pub data: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Stream: train, val or test.
    #[arg(long, default_value = "test")]
    pub split: String,
    /// Epoch of the stream (ignored for test).
    #[arg(long, default_value_t = 0)]
    pub epoch: u64,
    /// Number of sequences.
    #[arg(long, default_value_t = 16)]
    pub count: usize,
    /// Also write one PNG grid per sequence.
    #[arg(long)]
    pub png: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Replace an existing output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Epochs (train.epochs) [default: 5]
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Training sequences per epoch (train.train_size) [default: 10000]
    #[arg(long)]
    pub train_size: Option<usize>,
    /// Validation sequences per epoch, 0 to skip (train.val_size) [default: 1000]
    #[arg(long)]
    pub val_size: Option<usize>,
    /// Batch size (train.batch_size) [default: 16]
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Learning rate (train.learning_rate) [default: 1e-4, 5e-4 for vln-resnet]
    #[arg(long)]
    pub lr: Option<f64>,
    /// Future frames in the training loss (train.horizon) [default: 5]
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Run directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Continue from the latest checkpoint in --out.
    #[arg(long, conflicts_with = "force")]
    pub resume: bool,
    /// Replace an existing run directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args, Clone)]
pub struct ModelSource {
    /// Run directory; uses its manifest and best (else latest) checkpoint.
    #[arg(long)]
    pub run: Option<PathBuf>,
    /// Checkpoint file (with --config/--variant, or overriding --run's choice).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[command(flatten)]
    pub source: ModelSource,
    /// Built-in predictor instead of a model: copy-last, constant, oracle.
    #[arg(long)]
    pub baseline: Option<String>,
    /// Test sequences (train.test_size) [default: 1000]
    #[arg(long)]
    pub test_size: Option<usize>,
    /// Output directory for metrics.csv and manifest.toml.
    #[arg(long)]
    pub out: PathBuf,
    /// Replace an existing output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    #[command(flatten)]
    pub source: ModelSource,
    /// Sequences to render, `<stream>:<i>` or `<stream>:<first>..<last>` (inclusive).
    #[arg(long, default_value = "test:0..3")]
    pub select: String,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Replace an existing output directory.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct DescribeArgs {
    #[command(flatten)]
    pub cfg: ConfigArgs,
    /// Also write describe.txt and manifest.toml into this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses `train:3`, `test:0..3` (inclusive) into a stream and index range.
pub fn parse_selector(s: &str) -> Result<(StreamKind, std::ops::RangeInclusive<usize>)> {
    let bad = || Error::InvalidArgument(format!("invalid selector '{s}' (expected e.g. test:0..3)"));
    let (kind, range) = s.split_once(':').ok_or_else(bad)?;
    let kind: StreamKind = kind.parse()?;
    let (a, b) = match range.split_once("..") {
        Some((a, b)) => (a, b.strip_prefix('=').unwrap_or(b)),
        None => (range, range),
    };
    let a: usize = a.trim().parse().map_err(|_| bad())?;
    let b: usize = b.trim().parse().map_err(|_| bad())?;
    if b < a {
        return Err(bad());
    }
    Ok((kind, a..=b))
}

impl ConfigArgs {
    /// Config file (or variant preset) with flag and `--set` overrides;
    /// `--set` is applied last.
    pub fn resolve(&self, extra: &[String]) -> Result<RunConfig> {
        let base = match &self.config {
            Some(p) => fs::read_to_string(p).map_err(|e| Error::io(format!("reading {}", p.display()), e))?,
            None => {
                let variant: Variant = self.variant.parse()?;
                RunConfig::new(ModelConfig::preset(variant), TrainConfig::default()).to_toml()
            }
        };
        let mut overrides = extra.to_vec();
        if let Some(s) = self.seed {
            overrides.push(format!("train.seed={s}"));
        }
        overrides.extend(self.overrides.iter().cloned());
        RunConfig::from_toml(&base, &overrides)
    }

    pub fn data_dir(&self) -> PathBuf {
        self.data
            .clone()
            .or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_DATA_DIR))
    }

    pub fn load_data(&self, seed: u64) -> Result<MovingMnist> {
        let dir = self.data_dir();
        if !dir.exists() {
            return Err(Error::Data(format!(
                "MNIST directory {} not found (run `vln fetch-data --source <dir>`)",
                dir.display()
            )));
        }
        MovingMnist::load(&dir, seed)
    }
}

/// Reads the `[model]` and `[train]` tables of a run manifest.
pub fn read_manifest_config(run: &Path) -> Result<RunConfig> {
    let path = run.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut table: toml::Table =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    table.retain(|k, _| k == "model" || k == "train");
    table
        .try_into()
        .map_err(|e: toml::de::Error| Error::Config(format!("{}: {e}", path.display())))
}

fn resolve_model_source(cfg: &ConfigArgs, source: &ModelSource) -> Result<(RunConfig, PathBuf)> {
    match (&source.run, &source.checkpoint) {
        (Some(run), ckpt) => {
            let mut rc = read_manifest_config(run)?;
            if !cfg.overrides.is_empty() || cfg.seed.is_some() {
                let mut overrides = cfg.overrides.clone();
                if let Some(s) = cfg.seed {
                    overrides.push(format!("train.seed={s}"));
                }
                rc = RunConfig::from_toml(&rc.to_toml(), &overrides)?;
            }
            let path = match ckpt {
                Some(p) => p.clone(),
                None if best_checkpoint_path(run).exists() => best_checkpoint_path(run),
                None => {
                    let e = latest_epoch(run)?
                        .ok_or_else(|| Error::Checkpoint(format!("{} has no checkpoints", run.display())))?;
                    epoch_checkpoint_path(run, e)
                }
            };
            Ok((rc, path))
        }
        (None, Some(p)) => Ok((cfg.resolve(&[])?, p.clone())),
        (None, None) => Err(Error::InvalidArgument(
            "give --run or --checkpoint (or --baseline for eval)".into(),
        )),
    }
}

fn prepare_out(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        if !force {
            return Err(Error::InvalidArgument(format!(
                "{} already exists (use --force to replace)",
                dir.display()
            )));
        }
        fs::remove_dir_all(dir).map_err(|e| Error::io(format!("removing {}", dir.display()), e))?;
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))
}

fn run_fetch(a: &FetchArgs) -> Result<()> {
    let m = fetch_data(a.source.as_deref(), &a.dest, &mnist_checksums())?;
    for f in &m.files {
        println!("{:?} {} ({} bytes) sha256 {}", f.action, f.file, f.bytes, f.sha256);
    }
    println!(
        "manifest written to {}",
        a.dest.join(crate::data::fetch::MANIFEST_FILE).display()
    );
    Ok(())
}

fn run_generate(a: &GenerateArgs) -> Result<()> {
    let rc = a.cfg.resolve(&[])?;
    let kind: StreamKind = a.split.parse()?;
    let data = a.cfg.load_data(rc.train.seed)?;
    prepare_out(&a.out, a.force)?;
    let seqs: Vec<VideoSequence> = data.epoch_stream(kind, a.epoch, a.count).collect::<Result<_>>()?;
    let path = a.out.join(format!("{}-epoch{}.bin", kind.name(), a.epoch));
    let file = fs::File::create(&path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    write_dump(std::io::BufWriter::new(file), &seqs)?;
    if a.png {
        for (i, s) in seqs.iter().enumerate() {
            save_png(
                &prediction_grid(s, None)?,
                &a.out.join(format!("{}-{i:04}.png", kind.name())),
            )?;
        }
    }
    write_manifest(&a.out, "generate", &crate::train::run::run_id(&a.out), &rc)?;
    println!("wrote {} sequences to {}", seqs.len(), path.display());
    Ok(())
}

fn run_train(a: &TrainArgs) -> Result<()> {
    let mut extra = Vec::new();
    let mut flag = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            extra.push(format!("train.{k}={v}"));
        }
    };
    flag("epochs", a.epochs.map(|v| v.to_string()));
    flag("train_size", a.train_size.map(|v| v.to_string()));
    flag("val_size", a.val_size.map(|v| v.to_string()));
    flag("batch_size", a.batch_size.map(|v| v.to_string()));
    flag("learning_rate", a.lr.map(|v| format!("{v:e}")));
    flag("horizon", a.horizon.map(|v| v.to_string()));
    let rc = a.cfg.resolve(&extra)?;
    let data = a.cfg.load_data(rc.train.seed)?;
    println!(
        "training {} ({} parameters) lr {} for {} epochs into {}",
        rc.model.variant,
        Vln::new(rc.model.clone(), rc.train.init_seed)?.parameter_count(),
        rc.train.learning_rate(rc.model.variant),
        rc.train.epochs,
        a.out.display()
    );
    let out = train_run(
        &data,
        &rc,
        &a.out,
        RunOptions {
            resume: a.resume,
            force: a.force,
        },
        &mut |m| println!("{m}"),
    )?;
    if let Some(p) = &out.last_checkpoint {
        println!("last checkpoint {}", p.display());
    }
    Ok(())
}

fn run_eval(a: &EvalArgs) -> Result<()> {
    let (rc, model) = match &a.baseline {
        Some(_) if a.source.run.is_some() || a.source.checkpoint.is_some() => {
            return Err(Error::InvalidArgument("--baseline excludes --run/--checkpoint".into()))
        }
        Some(_) => (a.cfg.resolve(&[])?, None),
        None => {
            let (rc, path) = resolve_model_source(&a.cfg, &a.source)?;
            let mut m = load_model(&rc.model, &path)?;
            m.set_bn_mode(BnMode::Eval);
            let epoch = Checkpoint::load(&path)?.scalar("train.epoch").unwrap_or(0.0) as usize;
            (rc, Some((m, epoch)))
        }
    };
    let count = a.test_size.unwrap_or(rc.train.test_size);
    let data = a.cfg.load_data(rc.train.seed)?;
    prepare_out(&a.out, a.force)?;
    let (predictor, epoch): (Box<dyn Predictor>, usize) = match (&a.baseline, model) {
        (Some(b), _) => (baseline(b)?, 0),
        (None, Some((m, e))) => (Box::new(m), e),
        (None, None) => unreachable!("model resolved above"),
    };
    let report = evaluate_stream(
        predictor.as_ref(),
        &data,
        StreamKind::Test,
        0,
        count,
        rc.train.eval_batch_size,
        |done| eprint!("\r{done}/{count}"),
    )?;
    eprintln!();
    let rec = MetricsRecord::new(epoch, "test", predictor.name(), report.per_timestep.to_vec(), 0.0);
    write_csv(&a.out.join(METRICS), std::slice::from_ref(&rec))?;
    let train = TrainConfig {
        test_size: count,
        ..rc.train.clone()
    };
    write_manifest(
        &a.out,
        "eval",
        &crate::train::run::run_id(&a.out),
        &RunConfig::new(rc.model.clone(), train),
    )?;
    for (k, v) in report.per_timestep.iter().enumerate() {
        println!("t={:2}  {v:.3}", 11 + k);
    }
    println!(
        "{} mean test loss over {} sequences: {:.3}",
        predictor.name(),
        report.sequences,
        report.mean
    );
    Ok(())
}

pub fn baseline(name: &str) -> Result<Box<dyn Predictor>> {
    match name {
        "copy-last" | "copy" => Ok(Box::new(CopyLast)),
        "constant" => Ok(Box::new(Constant(0.5))),
        "oracle" => Ok(Box::new(Oracle)),
        other => Err(Error::InvalidArgument(format!(
            "unknown baseline '{other}' (expected copy-last, constant or oracle)"
        ))),
    }
}

fn run_predict(a: &PredictArgs) -> Result<()> {
    let (kind, range) = parse_selector(&a.select)?;
    let (rc, path) = resolve_model_source(&a.cfg, &a.source)?;
    let mut model = load_model(&rc.model, &path)?;
    model.set_bn_mode(BnMode::Eval);
    let data = a.cfg.load_data(rc.train.seed)?;
    prepare_out(&a.out, a.force)?;
    let seqs: Vec<VideoSequence> = range
        .clone()
        .map(|i| data.sequence(kind, 0, i as u64))
        .collect::<Result<_>>()?;
    let eval = evaluate_batch(&model, &seqs)?;
    for (j, (i, s)) in range.zip(&seqs).enumerate() {
        let frames: Vec<Vec<f32>> = eval
            .predictions
            .iter()
            .map(|p| p.data()[j * s.frame(0).len()..(j + 1) * s.frame(0).len()].to_vec())
            .collect();
        let file = a.out.join(format!("{}-{i:04}.png", kind.name()));
        save_png(&prediction_grid(s, Some(&frames))?, &file)?;
        let mean = eval.losses[j].iter().sum::<f64>() / eval.losses[j].len() as f64;
        println!("{} (mean loss {mean:.3})", file.display());
    }
    write_manifest(&a.out, "predict", &crate::train::run::run_id(&a.out), &rc)?;
    Ok(())
}

fn run_describe(a: &DescribeArgs) -> Result<()> {
    let rc = a.cfg.resolve(&[])?;
    let model = Vln::new(rc.model.clone(), rc.train.init_seed)?;
    let text = model.describe();
    print!("{text}");
    if let Some(out) = &a.out {
        fs::create_dir_all(out).map_err(|e| Error::io(format!("creating {}", out.display()), e))?;
        fs::write(out.join("describe.txt"), &text).map_err(|e| Error::io("writing describe.txt", e))?;
        write_manifest(out, "describe", &crate::train::run::run_id(out), &rc)?;
    }
    Ok(())
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::FetchData(a) => run_fetch(a),
        Command::Generate(a) => run_generate(a),
        Command::Train(a) => run_train(a),
        Command::Eval(a) => run_eval(a),
        Command::Predict(a) => run_predict(a),
        Command::Describe(a) => run_describe(a),
    }
}

/// Parses the process arguments, runs the command and returns the exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
