//! Sliding 10-frame input window.

use std::collections::VecDeque;

use crate::data::{VideoSequence, FRAME_SIZE, PAST_FRAMES};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Stacks frame `t` of every sequence into `[N, 1, 64, 64]`.
pub fn frame_batch(sequences: &[VideoSequence], t: usize) -> Result<Tensor> {
    let mut data = Vec::with_capacity(sequences.len() * FRAME_SIZE * FRAME_SIZE);
    for s in sequences {
        data.extend_from_slice(s.frame(t));
    }
    Tensor::new(&[sequences.len(), 1, FRAME_SIZE, FRAME_SIZE], data)
}

/// The frames currently presented to the model. After `n_t` fed-back
/// predictions the buffer holds ground truth `x_{n_t+1..10}` followed by
/// those predictions.
#[derive(Debug, Clone)]
pub struct WindowState {
    buffer: VecDeque<Tensor>,
    n_t: usize,
}

impl WindowState {
    /// Starts from the ten past frames of a batch.
    pub fn new(sequences: &[VideoSequence]) -> Result<Self> {
        if sequences.is_empty() {
            return Err(Error::InvalidArgument("window over an empty batch".into()));
        }
        let buffer = (0..PAST_FRAMES)
            .map(|t| frame_batch(sequences, t))
            .collect::<Result<_>>()?;
        Ok(WindowState { buffer, n_t: 0 })
    }

    pub fn frames(&self) -> impl Iterator<Item = &Tensor> {
        self.buffer.iter()
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn n_t(&self) -> usize {
        self.n_t
    }

    /// 1-based indices of the ground-truth frames still in the window.
    pub fn ground_truth_range(&self) -> std::ops::RangeInclusive<usize> {
        self.n_t + 1..=PAST_FRAMES
    }

    pub fn last(&self) -> &Tensor {
        self.buffer.back().expect("window is never empty")
    }

    /// Drops the oldest frame and appends a (detached) prediction.
    pub fn push_prediction(&mut self, prediction: &Tensor) -> Result<()> {
        if prediction.shape() != self.last().shape() {
            return Err(Error::shape(
                "window",
                format!(
                    "prediction {:?} does not match window frames {:?}",
                    prediction.shape(),
                    self.last().shape()
                ),
            ));
        }
        self.buffer.pop_front();
        self.buffer.push_back(prediction.detach());
        self.n_t = (self.n_t + 1).min(PAST_FRAMES);
        Ok(())
    }
}
