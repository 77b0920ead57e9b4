//! Writes ground truth and predicted futures of test sequences as PNG
//! grids, using a checkpoint or an untrained model.
//!
//! Run: `cargo run --release --example predict_grid -- [mnist-dir] [variant] [checkpoint]`

use std::path::PathBuf;

use vln::data::export::{prediction_grid, save_png};
use vln::data::{MovingMnist, StreamKind};
use vln::model::{BnMode, ModelConfig, Variant, Vln};
use vln::train::evaluate_batch;
use vln::train::run::load_model;

fn main() -> vln::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "data/mnist".into()));
    let variant: Variant = args.next().unwrap_or_else(|| "vln".into()).parse()?;
    let config = ModelConfig::preset(variant);
    let mut model = match args.next() {
        Some(path) => load_model(&config, path.as_ref())?,
        None => Vln::new(config, 0)?,
    };
    model.set_bn_mode(BnMode::Eval);
    let data = MovingMnist::load(&dir, 0)?;
    let batch = data
        .epoch_stream(StreamKind::Test, 0, 3)
        .collect::<vln::Result<Vec<_>>>()?;
    let eval = evaluate_batch(&model, &batch)?;
    for (i, seq) in batch.iter().enumerate() {
        let frames: Vec<Vec<f32>> = eval
            .predictions
            .iter()
            .map(|p| p.data()[i * 4096..(i + 1) * 4096].to_vec())
            .collect();
        let path = PathBuf::from(format!("prediction-{i}.png"));
        save_png(&prediction_grid(seq, Some(&frames))?, &path)?;
        let mean = eval.losses[i].iter().sum::<f64>() / 10.0;
        println!("{} mean loss {mean:.1}", path.display());
    }
    Ok(())
}
