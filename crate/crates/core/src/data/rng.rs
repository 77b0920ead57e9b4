//! Keyed random streams.
//!
//! Every random decision in the dataset comes from a ChaCha20 stream whose
//! 32-byte key is the little-endian concatenation
//! `global_seed ‖ purpose ‖ epoch ‖ index` (four u64 words). 64-bit draws
//! take two consecutive 32-bit ChaCha20 output words, low word first. From a
//! draw `u`:
//!
//! * uniform real in [0, 1): `(u >> 11) · 2⁻⁵³`
//! * uniform index in [0, n): `(u · n) >> 64` (128-bit product)
//!
//! Any implementation of ChaCha20 with a 64-bit block counter starting at 0
//! and nonce 0 reproduces the streams exactly.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// What a stream is used for; part of the key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Train,
    Validation,
    Test,
    Split,
}

impl Purpose {
    pub fn code(self) -> u64 {
        match self {
            Purpose::Train => 0,
            Purpose::Validation => 1,
            Purpose::Test => 2,
            Purpose::Split => 3,
        }
    }
}

/// Full provenance of a random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub purpose: Purpose,
    pub epoch: u64,
    pub index: u64,
}

impl StreamKey {
    pub fn bytes(&self) -> [u8; 32] {
        let mut key = [0u8; 32];
        key[0..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.purpose.code().to_le_bytes());
        key[16..24].copy_from_slice(&self.epoch.to_le_bytes());
        key[24..32].copy_from_slice(&self.index.to_le_bytes());
        key
    }
}

pub struct KeyedRng {
    inner: ChaCha20Rng,
}

impl KeyedRng {
    pub fn new(key: StreamKey) -> Self {
        KeyedRng {
            inner: ChaCha20Rng::from_seed(key.bytes()),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn index(&mut self, n: usize) -> usize {
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }
}
