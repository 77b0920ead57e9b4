#![allow(dead_code)]

pub mod invariants;
pub mod oracle;
pub mod runs;
pub mod structure;

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vln::data::{DigitSprite, MovingMnist, DIGIT_PIXELS};
use vln::tensor::Element;
use vln::Tensor;

/// `$VLN_DATA_DIR`, else `<workspace>/data/mnist`.
pub fn data_dir() -> PathBuf {
    std::env::var_os("VLN_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist"))
}

pub fn mnist_available() -> bool {
    data_dir().join("train-images-idx3-ubyte").exists()
}

/// Real MNIST when installed, else `None` (callers print a skip notice).
pub fn real_data(seed: u64) -> Option<MovingMnist> {
    if !mnist_available() {
        eprintln!("MNIST not found in {}; skipping", data_dir().display());
        return None;
    }
    Some(MovingMnist::load(&data_dir(), seed).expect("load MNIST"))
}

/// Random blob-like sprites, 20 per class.
pub fn synthetic_sprites(per_class: usize, seed: u64) -> Vec<DigitSprite> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..10 * per_class)
        .map(|i| {
            let cx = rng.random_range(8.0..20.0f32);
            let cy = rng.random_range(8.0..20.0f32);
            let r = rng.random_range(3.0..7.0f32);
            let px: Vec<f32> = (0..DIGIT_PIXELS)
                .map(|p| {
                    let (x, y) = ((p % 28) as f32, (p / 28) as f32);
                    let d = ((x - cx).powi(2) + (y - cy).powi(2)).sqrt();
                    (1.0 - (d - r).max(0.0) / 2.0).clamp(0.0, 1.0)
                })
                .collect();
            DigitSprite::new(&px, (i % 10) as u8).unwrap()
        })
        .collect()
}

pub fn synthetic_data(seed: u64) -> MovingMnist {
    MovingMnist::from_sprites(synthetic_sprites(20, seed), synthetic_sprites(5, seed + 1), seed).unwrap()
}

pub fn random_tensor<T: Element>(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<T> {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| T::from_f64(rng.random_range(lo..hi))).collect()).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
