//! Generates Moving MNIST sequences and writes them as PNG grids.
//!
//! Run: `cargo run --release --example moving_mnist -- [mnist-dir] [out-dir]`

use std::path::PathBuf;

use vln::data::export::{prediction_grid, save_png};
use vln::data::{MovingMnist, StreamKind};

fn main() -> vln::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "data/mnist".into()));
    let out = PathBuf::from(args.next().unwrap_or_else(|| "moving-mnist".into()));
    let data = MovingMnist::load(&dir, 0)?;
    std::fs::create_dir_all(&out).expect("create output directory");
    for kind in [StreamKind::Train, StreamKind::Validation, StreamKind::Test] {
        println!("{:>10}: {} digits", kind.name(), data.pool(kind).len());
        for i in 0..2 {
            let seq = data.sequence(kind, 0, i)?;
            let path = out.join(format!("{}-{i}.png", kind.name()));
            save_png(&prediction_grid(&seq, None)?, &path)?;
            println!("            {}", path.display());
        }
    }
    Ok(())
}
