//! Test-set losses of the built-in predictors: copy-last, constant 0.5 and
//! the oracle.
//!
//! Run: `cargo run --release --example copy_baseline -- [mnist-dir] [sequences]`

use std::path::PathBuf;

use vln::data::{MovingMnist, StreamKind};
use vln::train::eval::{evaluate_stream, Constant, CopyLast, Oracle, Predictor};

fn main() -> vln::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "data/mnist".into()));
    let count: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(200);
    let data = MovingMnist::load(&dir, 0)?;
    let predictors: [(&str, &dyn Predictor); 3] = [
        ("copy-last", &CopyLast),
        ("constant", &Constant(0.5)),
        ("oracle", &Oracle),
    ];
    for (name, p) in predictors {
        let r = evaluate_stream(p, &data, StreamKind::Test, 0, count, 25, |_| {})?;
        let curve: Vec<String> = r.per_timestep.iter().map(|v| format!("{v:.1}")).collect();
        println!("{name:>10} mean {:8.2}  [{}]", r.mean, curve.join(" "));
    }
    Ok(())
}
