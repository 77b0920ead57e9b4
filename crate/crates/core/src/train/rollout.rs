//! Training-mode unrolling: one frame per step with persistent state.

use super::optim::RmsProp;
use super::window::frame_batch;
use crate::data::{VideoSequence, PAST_FRAMES, SEQUENCE_LENGTH};
use crate::error::{Error, Result};
use crate::model::Vln;
use crate::tensor::{bce_loss, Tensor};

pub const MAX_HORIZON: usize = SEQUENCE_LENGTH - PAST_FRAMES;

pub struct Rollout {
    /// Mean over the horizon of the batch-mean frame loss.
    pub loss: Tensor,
    /// Batch-mean loss of each predicted frame `x̂_11 …`.
    pub per_frame: Vec<f64>,
    /// Detached predictions `x̂_11 …`.
    pub predictions: Vec<Tensor>,
}

/// Feeds `x_1 … x_10`, then predicts `horizon` future frames, feeding each
/// detached prediction back as the next input. The conv-LSTM state is never
/// reset and the window is never re-fed.
pub fn rollout(model: &Vln, batch: &[VideoSequence], horizon: usize) -> Result<Rollout> {
    if !(1..=MAX_HORIZON).contains(&horizon) {
        return Err(Error::InvalidArgument(format!(
            "training horizon {horizon} outside 1..={MAX_HORIZON}"
        )));
    }
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty training batch".into()));
    }
    let mut state = model.zero_state();
    for t in 0..PAST_FRAMES - 1 {
        state = model.advance(&frame_batch(batch, t)?, &state)?;
    }
    let (mut prediction, mut state) = model.step(&frame_batch(batch, PAST_FRAMES - 1)?, &state)?;
    let mut losses = Vec::with_capacity(horizon);
    let mut per_frame = Vec::with_capacity(horizon);
    let mut predictions = Vec::with_capacity(horizon);
    for k in 0..horizon {
        let target = frame_batch(batch, PAST_FRAMES + k)?;
        let l = bce_loss(&prediction, &target)?.mean();
        per_frame.push(l.item()? as f64);
        losses.push(l);
        let fed = prediction.detach();
        predictions.push(fed.clone());
        if k + 1 < horizon {
            (prediction, state) = model.step(&fed, &state)?;
        }
    }
    let mut total = losses[0].clone();
    for l in &losses[1..] {
        total = total.add(l)?;
    }
    Ok(Rollout {
        loss: total.scale(1.0 / horizon as f32),
        per_frame,
        predictions,
    })
}

/// Loss of one optimizer step.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchLoss {
    pub loss: f64,
    pub per_frame: Vec<f64>,
}

/// Zeroes gradients, unrolls, backpropagates and applies one optimizer
/// update.
pub fn train_batch(
    model: &mut Vln,
    optimizer: &mut RmsProp,
    batch: &[VideoSequence],
    horizon: usize,
) -> Result<BatchLoss> {
    model.zero_grads();
    let out = rollout(model, batch, horizon)?;
    let loss = out.loss.item()? as f64;
    if !loss.is_finite() {
        return Err(Error::Numerical(format!("training loss is {loss}")));
    }
    out.loss.backward()?;
    optimizer.step(model.store_mut())?;
    Ok(BatchLoss {
        loss,
        per_frame: out.per_frame,
    })
}
