//! Small training runs and byte-level comparison of their outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use vln::data::MovingMnist;
use vln::model::{ModelConfig, Variant};
use vln::train::{train_run, RunConfig, RunOptions, TrainConfig};

/// A run small enough for a test: two epochs of four sequences.
pub fn tiny_config(variant: Variant) -> RunConfig {
    RunConfig::new(
        ModelConfig::preset(variant),
        TrainConfig {
            epochs: 2,
            train_size: 4,
            val_size: 2,
            batch_size: 2,
            eval_batch_size: 2,
            horizon: 2,
            ..TrainConfig::default()
        },
    )
}

pub fn run(data: &MovingMnist, cfg: &RunConfig, dir: &Path, resume: bool) -> vln::Result<()> {
    train_run(data, cfg, dir, RunOptions { resume, force: false }, &mut |_| {}).map(|_| ())
}

/// Checkpoint and metrics bytes of a run directory, keyed by relative path
/// with the run id stripped from file names.
pub fn artifacts(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let id = dir.file_name().unwrap().to_string_lossy().to_string();
    let mut out = BTreeMap::new();
    out.insert("metrics.csv".to_string(), fs::read(dir.join("metrics.csv")).unwrap());
    for e in fs::read_dir(dir.join("checkpoints")).unwrap() {
        let e = e.unwrap();
        let name = e.file_name().to_string_lossy().replacen(&id, "run", 1);
        out.insert(format!("checkpoints/{name}"), fs::read(e.path()).unwrap());
    }
    out
}

/// Names of artifacts that differ between two runs (or exist in only one).
pub fn differing(a: &BTreeMap<String, Vec<u8>>, b: &BTreeMap<String, Vec<u8>>) -> Vec<String> {
    let mut keys: Vec<&String> = a.keys().chain(b.keys()).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter().filter(|k| a.get(*k) != b.get(*k)).cloned().collect()
}
