//! Runs a standalone conv-LSTM cell over a short random sequence.
//!
//! Run: `cargo run --release --example conv_lstm_cell`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vln::model::convlstm::{convlstm_step, ConvLstmWeights};
use vln::Tensor;

fn random(rng: &mut ChaCha8Rng, shape: &[usize], scale: f32) -> vln::Result<Tensor> {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.random_range(-scale..scale)).collect())
}

fn main() -> vln::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (cz, ch, size) = (3, 4, 8);
    let gate = |rng: &mut ChaCha8Rng, cin: usize| random(rng, &[ch, cin, 3, 3], 0.3);
    let weights = ConvLstmWeights {
        w_z: [
            gate(&mut rng, cz)?,
            gate(&mut rng, cz)?,
            gate(&mut rng, cz)?,
            gate(&mut rng, cz)?,
        ],
        w_h: [
            gate(&mut rng, ch)?,
            gate(&mut rng, ch)?,
            gate(&mut rng, ch)?,
            gate(&mut rng, ch)?,
        ],
        b: [
            Tensor::zeros(&[ch]),
            Tensor::full(&[ch], 1.0),
            Tensor::zeros(&[ch]),
            Tensor::zeros(&[ch]),
        ],
    };
    let mut state = None;
    for t in 0..5 {
        let z = random(&mut rng, &[2, cz, size, size], 1.0)?;
        let next = convlstm_step(&weights, &z, state.as_ref())?;
        let h = next.hidden.data();
        let mean_abs = h.iter().map(|v| v.abs()).sum::<f32>() / h.len() as f32;
        println!("t={t} hidden {:?} mean |h| {mean_abs:.4}", next.hidden.shape());
        state = Some(next);
    }
    Ok(())
}
