//! Training runs: run directory, per-epoch checkpoints, metrics and resume.
//!
//! Layout of a run directory `<dir>` whose run id is its file name:
//!
//! ```text
//! <dir>/manifest.toml                      configs, seeds, version
//! <dir>/metrics.csv                        epoch,split,timestep,loss
//! <dir>/checkpoints/<run-id>-epoch0001.ckpt
//! <dir>/checkpoints/<run-id>-best.ckpt     best validation mean so far
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::eval::evaluate_stream;
use super::metrics::{read_csv, write_csv, MetricsRecord};
use super::optim::RmsProp;
use super::rollout::train_batch;
use crate::checkpoint::{model_checkpoint, push_optimizer, restore_model, restore_optimizer, Checkpoint};
use crate::data::{MovingMnist, StreamKind, VideoSequence};
use crate::error::{Error, Result};
use crate::model::{BnMode, ModelConfig, Vln};

pub const MANIFEST: &str = "manifest.toml";
pub const METRICS: &str = "metrics.csv";
pub const CHECKPOINT_DIR: &str = "checkpoints";

/// Model and training configuration as one TOML document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

impl RunConfig {
    pub fn new(model: ModelConfig, train: TrainConfig) -> Self {
        RunConfig { model, train }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Parses `text` after applying `section.key=value` overrides. Values
    /// are read as TOML literals, falling back to plain strings.
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{assignment}' is not key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.len() != 2 || path.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!(
            "override key '{key}' must be section.key (model.* or train.*)"
        )));
    }
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let section = table
        .entry(path[0].to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    section
        .as_table_mut()
        .ok_or_else(|| Error::Config(format!("'{}' is not a section", path[0])))?
        .insert(path[1].to_string(), value);
    Ok(())
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    run_id: &'a str,
    config_hash: String,
    model: &'a ModelConfig,
    train: &'a TrainConfig,
}

/// Writes `manifest.toml` describing a command invocation.
pub fn write_manifest(dir: &Path, command: &str, run_id: &str, cfg: &RunConfig) -> Result<()> {
    let train = cfg.train.resolved(cfg.model.variant);
    let m = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        run_id,
        config_hash: cfg.model.hash().iter().map(|b| format!("{b:02x}")).collect(),
        model: &cfg.model,
        train: &train,
    };
    let text = toml::to_string(&m).map_err(|e| Error::Config(format!("manifest: {e}")))?;
    let path = dir.join(MANIFEST);
    fs::write(&path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Continue from the latest checkpoint in an existing run directory.
    pub resume: bool,
    /// Replace an existing run directory.
    pub force: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub epochs_completed: usize,
    pub last_checkpoint: Option<PathBuf>,
    pub best_checkpoint: Option<PathBuf>,
    pub metrics: Vec<MetricsRecord>,
}

pub fn run_id(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into())
}

pub fn epoch_checkpoint_path(dir: &Path, epoch: usize) -> PathBuf {
    dir.join(CHECKPOINT_DIR)
        .join(format!("{}-epoch{epoch:04}.ckpt", run_id(dir)))
}

pub fn best_checkpoint_path(dir: &Path) -> PathBuf {
    dir.join(CHECKPOINT_DIR).join(format!("{}-best.ckpt", run_id(dir)))
}

/// Epoch of the newest per-epoch checkpoint in a run directory.
pub fn latest_epoch(dir: &Path) -> Result<Option<usize>> {
    let ckdir = dir.join(CHECKPOINT_DIR);
    if !ckdir.exists() {
        return Ok(None);
    }
    let prefix = format!("{}-epoch", run_id(dir));
    let mut best = None;
    for entry in fs::read_dir(&ckdir).map_err(|e| Error::io(format!("listing {}", ckdir.display()), e))? {
        let name = entry
            .map_err(|e| Error::io(format!("listing {}", ckdir.display()), e))?
            .file_name()
            .to_string_lossy()
            .into_owned();
        if let Some(n) = name
            .strip_prefix(&prefix)
            .and_then(|r| r.strip_suffix(".ckpt"))
            .and_then(|n| n.parse::<usize>().ok())
        {
            best = best.max(Some(n));
        }
    }
    Ok(best)
}

/// Creates a fresh run directory; an existing one is an error unless
/// `force` is set, in which case it is replaced.
pub fn create_run_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        if !force {
            return Err(Error::InvalidArgument(format!(
                "{} already exists (use --force to replace or --resume to continue)",
                dir.display()
            )));
        }
        fs::remove_dir_all(dir).map_err(|e| Error::io(format!("removing {}", dir.display()), e))?;
    }
    if let Some(parent) = dir.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(format!("creating {}", parent.display()), e))?;
    }
    fs::create_dir(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    fs::create_dir(dir.join(CHECKPOINT_DIR)).map_err(|e| Error::io(format!("creating {}", dir.display()), e))
}

/// Full training state at the end of `epoch`.
fn training_checkpoint(model: &Vln, opt: &RmsProp, epoch: usize, best_val: f32) -> Checkpoint {
    let mut c = model_checkpoint(model);
    push_optimizer(&mut c, model, opt);
    c.push("train.epoch", &[], vec![epoch as f32]);
    c.push("train.best_val", &[], vec![best_val]);
    c
}

/// Trains per `cfg`, writing checkpoints and metrics into `dir`.
pub fn train_run(
    data: &MovingMnist,
    cfg: &RunConfig,
    dir: &Path,
    opts: RunOptions,
    log: &mut dyn FnMut(&str),
) -> Result<RunOutcome> {
    cfg.validate()?;
    let tc = &cfg.train;
    let variant = cfg.model.variant;
    let mut model = Vln::new(cfg.model.clone(), tc.init_seed)?;
    let mut opt = RmsProp::new(model.store(), tc.learning_rate(variant), tc.rho, tc.epsilon);
    let mut start = 0;
    let mut best_val = f32::INFINITY;
    let mut metrics = Vec::new();
    let mut last_checkpoint = None;

    let resume_from = if opts.resume && dir.exists() {
        latest_epoch(dir)?
    } else {
        None
    };
    if let Some(epoch) = resume_from {
        let path = epoch_checkpoint_path(dir, epoch);
        let c = Checkpoint::load(&path)?;
        restore_model(&mut model, &c)?;
        restore_optimizer(&mut opt, &model, &c)?;
        start = c.scalar("train.epoch").map(|e| e as usize).unwrap_or(epoch);
        best_val = c.scalar("train.best_val").unwrap_or(f32::INFINITY);
        let csv = dir.join(METRICS);
        if csv.exists() {
            metrics = read_csv(&csv, variant.name())?
                .into_iter()
                .filter(|r| r.epoch <= start)
                .collect();
        }
        last_checkpoint = Some(path);
        log(&format!("resuming {} after epoch {start}", dir.display()));
    } else if opts.resume && dir.exists() {
        log(&format!("{} has no checkpoint; starting from scratch", dir.display()));
    } else {
        create_run_dir(dir, opts.force)?;
    }
    fs::create_dir_all(dir.join(CHECKPOINT_DIR)).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    write_manifest(dir, "train", &run_id(dir), cfg)?;

    let mut best_checkpoint = best_checkpoint_path(dir).exists().then(|| best_checkpoint_path(dir));
    for epoch in start + 1..=tc.epochs {
        let timer = Instant::now();
        let stream_epoch = if tc.fixed_train_set { 0 } else { epoch as u64 - 1 };
        model.set_bn_mode(BnMode::Train);
        let mut sums = vec![0.0; tc.horizon];
        let mut batches = 0usize;
        let mut first = 0;
        while first < tc.train_size {
            let last = (first + tc.batch_size).min(tc.train_size);
            let batch: Vec<VideoSequence> = (first..last)
                .map(|i| data.sequence(StreamKind::Train, stream_epoch, i as u64))
                .collect::<Result<_>>()?;
            let per_frame = match train_batch(&mut model, &mut opt, &batch, tc.horizon) {
                Ok(b) => b.per_frame,
                Err(Error::Numerical(msg)) => {
                    let pointer = last_checkpoint
                        .as_ref()
                        .map(|p: &PathBuf| format!("last good checkpoint: {}", p.display()))
                        .unwrap_or_else(|| "no checkpoint written yet".into());
                    return Err(Error::Numerical(format!(
                        "{msg} at epoch {epoch}, sequences {first}..{last}; {pointer}"
                    )));
                }
                Err(e) => return Err(e),
            };
            for (s, v) in sums.iter_mut().zip(&per_frame) {
                *s += v;
            }
            batches += 1;
            first = last;
        }
        let per_timestep: Vec<f64> = sums.iter().map(|s| s / batches as f64).collect();
        let train_rec = MetricsRecord::new(
            epoch,
            "train",
            variant.name(),
            per_timestep,
            timer.elapsed().as_secs_f64(),
        );
        log(&format!("epoch {epoch}: train loss {:.3}", train_rec.mean));
        metrics.push(train_rec);

        if tc.val_size > 0 {
            let timer = Instant::now();
            model.set_bn_mode(BnMode::Eval);
            let report = evaluate_stream(
                &model,
                data,
                StreamKind::Validation,
                epoch as u64 - 1,
                tc.val_size,
                tc.eval_batch_size,
                |_| {},
            )?;
            model.set_bn_mode(BnMode::Train);
            let rec = MetricsRecord::new(
                epoch,
                "val",
                variant.name(),
                report.per_timestep.to_vec(),
                timer.elapsed().as_secs_f64(),
            );
            log(&format!("epoch {epoch}: validation loss {:.3}", rec.mean));
            let val = rec.mean as f32;
            metrics.push(rec);
            if val < best_val {
                best_val = val;
                let path = best_checkpoint_path(dir);
                model_checkpoint(&model).save(&path)?;
                best_checkpoint = Some(path);
            }
        }
        write_csv(&dir.join(METRICS), &metrics)?;
        if epoch % tc.checkpoint_every == 0 || epoch == tc.epochs {
            let path = epoch_checkpoint_path(dir, epoch);
            training_checkpoint(&model, &opt, epoch, best_val).save(&path)?;
            last_checkpoint = Some(path);
        }
    }
    if metrics.is_empty() || !dir.join(METRICS).exists() {
        write_csv(&dir.join(METRICS), &metrics)?;
    }
    Ok(RunOutcome {
        epochs_completed: tc.epochs.max(start),
        last_checkpoint,
        best_checkpoint,
        metrics,
    })
}

/// Loads a model from a checkpoint written by a run or by `save`.
pub fn load_model(config: &ModelConfig, path: &Path) -> Result<Vln> {
    let mut model = Vln::new(config.clone(), 0)?;
    restore_model(&mut model, &Checkpoint::load(path)?)?;
    Ok(model)
}
