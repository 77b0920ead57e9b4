//! Per-epoch sequence streams over the train/validation/test sprite pools.

use std::path::Path;

use super::idx::{load_mnist, DigitSprite};
use super::moving::{generate_sequence, VideoSequence};
use super::rng::{Purpose, StreamKey};
use super::split::stratified_split;
use crate::error::{Error, Result};

pub const VALIDATION_FRACTION: f64 = 0.2;
pub const TRAIN_SEQUENCES_PER_EPOCH: usize = 10_000;
pub const VALIDATION_SEQUENCES_PER_EPOCH: usize = 1_000;
pub const TEST_SEQUENCES: usize = 10_000;

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamKind {
    Train,
    Validation,
    Test,
}

impl StreamKind {
    pub fn purpose(self) -> Purpose {
        match self {
            StreamKind::Train => Purpose::Train,
            StreamKind::Validation => Purpose::Validation,
            StreamKind::Test => Purpose::Test,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StreamKind::Train => "train",
            StreamKind::Validation => "val",
            StreamKind::Test => "test",
        }
    }
}

impl std::str::FromStr for StreamKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(StreamKind::Train),
            "val" | "validation" => Ok(StreamKind::Validation),
            "test" => Ok(StreamKind::Test),
            other => Err(Error::InvalidArgument(format!(
                "unknown stream '{other}' (expected train, val or test)"
            ))),
        }
    }
}

/// The three sprite pools plus the global seed that keys every stream.
#[derive(Debug, Clone)]
pub struct MovingMnist {
    pub train: Vec<DigitSprite>,
    pub validation: Vec<DigitSprite>,
    pub test: Vec<DigitSprite>,
    pub seed: u64,
}

impl MovingMnist {
    /// Splits the MNIST training sprites 80/20 (stratified) and keeps the
    /// MNIST test sprites as the test pool.
    pub fn from_sprites(train_sprites: Vec<DigitSprite>, test: Vec<DigitSprite>, seed: u64) -> Result<Self> {
        let labels: Vec<u8> = train_sprites.iter().map(|s| s.label).collect();
        let split = stratified_split(&labels, 10, VALIDATION_FRACTION, seed)?;
        let pick = |idx: &[usize]| idx.iter().map(|&i| train_sprites[i].clone()).collect::<Vec<_>>();
        let train = pick(&split.train);
        let validation = pick(&split.validation);
        if test.is_empty() {
            return Err(Error::Data("test sprite pool is empty".into()));
        }
        Ok(MovingMnist {
            train,
            validation,
            test,
            seed,
        })
    }

    /// Loads the four IDX files from `dir`.
    pub fn load(dir: &Path, seed: u64) -> Result<Self> {
        let train = load_mnist(&dir.join(TRAIN_IMAGES), &dir.join(TRAIN_LABELS))?;
        let test = load_mnist(&dir.join(TEST_IMAGES), &dir.join(TEST_LABELS))?;
        Self::from_sprites(train, test, seed)
    }

    pub fn pool(&self, kind: StreamKind) -> &[DigitSprite] {
        match kind {
            StreamKind::Train => &self.train,
            StreamKind::Validation => &self.validation,
            StreamKind::Test => &self.test,
        }
    }

    /// Stream key of sequence `index`. The test stream ignores `epoch` so the
    /// test set is identical for every evaluation.
    pub fn key(&self, kind: StreamKind, epoch: u64, index: u64) -> StreamKey {
        StreamKey {
            seed: self.seed,
            purpose: kind.purpose(),
            epoch: if kind == StreamKind::Test { 0 } else { epoch },
            index,
        }
    }

    pub fn sequence(&self, kind: StreamKind, epoch: u64, index: u64) -> Result<VideoSequence> {
        generate_sequence(self.pool(kind), self.key(kind, epoch, index))
    }

    /// Lazily generated sequences `0..count` of one epoch.
    pub fn epoch_stream(&self, kind: StreamKind, epoch: u64, count: usize) -> EpochStream<'_> {
        EpochStream {
            data: self,
            kind,
            epoch,
            next: 0,
            count,
        }
    }
}

/// Default sequence count of each stream.
pub fn default_count(kind: StreamKind) -> usize {
    match kind {
        StreamKind::Train => TRAIN_SEQUENCES_PER_EPOCH,
        StreamKind::Validation => VALIDATION_SEQUENCES_PER_EPOCH,
        StreamKind::Test => TEST_SEQUENCES,
    }
}

pub struct EpochStream<'a> {
    data: &'a MovingMnist,
    kind: StreamKind,
    epoch: u64,
    next: usize,
    count: usize,
}

impl Iterator for EpochStream<'_> {
    type Item = Result<VideoSequence>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.next >= self.count {
            return None;
        }
        let s = self.data.sequence(self.kind, self.epoch, self.next as u64);
        self.next += 1;
        Some(s)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.count - self.next;
        (left, Some(left))
    }
}

impl ExactSizeIterator for EpochStream<'_> {}

#[cfg(test)]
mod tests {
    use super::super::idx::DIGIT_PIXELS;
    use super::*;

    fn sprites(n: usize) -> Vec<DigitSprite> {
        (0..n)
            .map(|i| {
                let px: Vec<f32> = (0..DIGIT_PIXELS)
                    .map(|p| ((p * 31 + i * 7) % 256) as f32 / 255.0)
                    .collect();
                DigitSprite::new(&px, (i % 10) as u8).unwrap()
            })
            .collect()
    }

    fn data() -> MovingMnist {
        MovingMnist::from_sprites(sprites(100), sprites(20), 5).unwrap()
    }

    #[test]
    fn split_sizes() {
        let d = data();
        assert_eq!(d.train.len(), 80);
        assert_eq!(d.validation.len(), 20);
    }

    #[test]
    fn train_epochs_differ_and_repeat() {
        let d = data();
        let a: Vec<_> = d.epoch_stream(StreamKind::Train, 0, 3).map(Result::unwrap).collect();
        let b: Vec<_> = d.epoch_stream(StreamKind::Train, 0, 3).map(Result::unwrap).collect();
        let c: Vec<_> = d.epoch_stream(StreamKind::Train, 1, 3).map(Result::unwrap).collect();
        assert_eq!(a, b);
        assert_ne!(a[0].frames, c[0].frames);
    }

    #[test]
    fn test_stream_ignores_epoch() {
        let d = data();
        assert_eq!(
            d.sequence(StreamKind::Test, 0, 4).unwrap(),
            d.sequence(StreamKind::Test, 9, 4).unwrap()
        );
    }

    #[test]
    fn stream_counts() {
        let d = data();
        assert_eq!(d.epoch_stream(StreamKind::Validation, 0, 7).len(), 7);
        assert_eq!(default_count(StreamKind::Train), 10_000);
        assert_eq!(default_count(StreamKind::Validation), 1_000);
        assert_eq!(default_count(StreamKind::Test), 10_000);
    }
}
