//! Overfits VLN-BL on a fixed batch of eight sequences with the low-level
//! training step.
//!
//! Run: `cargo run --release --example train_desk_scale -- [mnist-dir] [steps]`

use std::path::PathBuf;
use std::time::Instant;

use vln::data::{MovingMnist, StreamKind};
use vln::model::{BnMode, ModelConfig, Variant, Vln};
use vln::train::{train_batch, RmsProp, TrainConfig};

fn main() -> vln::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "data/mnist".into()));
    let steps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(200);
    let data = MovingMnist::load(&dir, 0)?;
    let batch = data
        .epoch_stream(StreamKind::Train, 0, 8)
        .collect::<vln::Result<Vec<_>>>()?;

    let tc = TrainConfig::default();
    let mut model = Vln::new(ModelConfig::preset(Variant::VlnBl), 0)?;
    model.set_bn_mode(BnMode::Train);
    let mut opt = RmsProp::new(model.store(), tc.learning_rate(Variant::VlnBl), tc.rho, tc.epsilon);
    let timer = Instant::now();
    let mut first = None;
    for step in 1..=steps {
        let loss = train_batch(&mut model, &mut opt, &batch, tc.horizon)?.loss;
        let initial = *first.get_or_insert(loss);
        if step == 1 || step % 20 == 0 {
            println!(
                "step {step:4} loss {loss:9.2} ({:5.1}% of initial) {:.0}s",
                100.0 * loss / initial,
                timer.elapsed().as_secs_f64()
            );
        }
    }
    Ok(())
}
