//! Evaluation-mode windowing: every prediction re-feeds the shifted window
//! from a reset state.

use super::window::{frame_batch, WindowState};
use crate::data::{MovingMnist, StreamKind, VideoSequence, PAST_FRAMES};
use crate::error::{Error, Result};
use crate::model::{BnMode, Vln};
use crate::tensor::{bce_loss, no_grad, Tensor};

pub const EVAL_HORIZON: usize = 10;

/// Produces `x̂_t` from the current window.
pub trait Predictor {
    fn name(&self) -> &str;

    /// `truth` is the frame being predicted; only oracles may read it.
    fn predict(&self, window: &WindowState, truth: &Tensor) -> Result<Tensor>;
}

/// Resets the model state, feeds the ten window frames and returns the last
/// output.
impl Predictor for Vln {
    fn name(&self) -> &str {
        self.config().variant.name()
    }

    fn predict(&self, window: &WindowState, _truth: &Tensor) -> Result<Tensor> {
        let frames: Vec<&Tensor> = window.frames().collect();
        let (last, warmup) = frames.split_last().expect("window is never empty");
        let mut state = self.zero_state();
        for f in warmup {
            state = self.advance(f, &state)?;
        }
        Ok(self.step(last, &state)?.0)
    }
}

/// Repeats the newest window frame.
pub struct CopyLast;

impl Predictor for CopyLast {
    fn name(&self) -> &str {
        "copy-last"
    }

    fn predict(&self, window: &WindowState, _truth: &Tensor) -> Result<Tensor> {
        Ok(window.last().clone())
    }
}

/// Predicts a constant intensity everywhere.
pub struct Constant(pub f32);

impl Predictor for Constant {
    fn name(&self) -> &str {
        "constant"
    }

    fn predict(&self, window: &WindowState, _truth: &Tensor) -> Result<Tensor> {
        Ok(Tensor::full(window.last().shape(), self.0))
    }
}

/// Returns the ground truth.
pub struct Oracle;

impl Predictor for Oracle {
    fn name(&self) -> &str {
        "oracle"
    }

    fn predict(&self, _window: &WindowState, truth: &Tensor) -> Result<Tensor> {
        Ok(truth.clone())
    }
}

/// Per-sequence losses of frames 11–20 and the predictions themselves.
pub struct BatchEvaluation {
    /// `losses[i][k]`: loss of sequence `i` at frame `11 + k`.
    pub losses: Vec<[f64; EVAL_HORIZON]>,
    /// `predictions[k]`: batch of predicted frame `11 + k`.
    pub predictions: Vec<Tensor>,
}

/// Runs the ten-step windowed evaluation on a batch without recording
/// gradients. Model predictors must be in [`BnMode::Eval`].
pub fn evaluate_batch(predictor: &dyn Predictor, batch: &[VideoSequence]) -> Result<BatchEvaluation> {
    let _g = no_grad();
    let mut window = WindowState::new(batch)?;
    let mut losses = vec![[0.0; EVAL_HORIZON]; batch.len()];
    let mut predictions = Vec::with_capacity(EVAL_HORIZON);
    for k in 0..EVAL_HORIZON {
        let truth = frame_batch(batch, PAST_FRAMES + k)?;
        let p = predictor.predict(&window, &truth)?;
        let l = bce_loss(&p, &truth)?;
        for (row, &v) in losses.iter_mut().zip(l.data()) {
            row[k] = v as f64;
        }
        window.push_prediction(&p)?;
        predictions.push(p);
    }
    Ok(BatchEvaluation { losses, predictions })
}

/// Aggregate of a windowed evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub sequences: usize,
    /// Mean loss of frames 11–20.
    pub per_timestep: [f64; EVAL_HORIZON],
    pub mean: f64,
}

impl EvalReport {
    /// Averages per-sequence rows in their given order.
    pub fn from_rows(rows: &[[f64; EVAL_HORIZON]]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidArgument("evaluation over zero sequences".into()));
        }
        let mut per_timestep = [0.0; EVAL_HORIZON];
        for r in rows {
            for (acc, v) in per_timestep.iter_mut().zip(r) {
                *acc += v;
            }
        }
        for v in &mut per_timestep {
            *v /= rows.len() as f64;
        }
        let mean = per_timestep.iter().sum::<f64>() / EVAL_HORIZON as f64;
        Ok(EvalReport {
            sequences: rows.len(),
            per_timestep,
            mean,
        })
    }
}

/// Evaluates one sequence.
pub fn evaluate_sequence(predictor: &dyn Predictor, sequence: &VideoSequence) -> Result<EvalReport> {
    let e = evaluate_batch(predictor, std::slice::from_ref(sequence))?;
    EvalReport::from_rows(&e.losses)
}

/// Evaluates sequences `0..count` of a stream in batches of `batch_size`.
pub fn evaluate_stream(
    predictor: &dyn Predictor,
    data: &MovingMnist,
    kind: StreamKind,
    epoch: u64,
    count: usize,
    batch_size: usize,
    mut progress: impl FnMut(usize),
) -> Result<EvalReport> {
    let batch_size = batch_size.max(1);
    let mut rows = Vec::with_capacity(count);
    let mut start = 0;
    while start < count {
        let end = (start + batch_size).min(count);
        let batch: Vec<VideoSequence> = (start..end)
            .map(|i| data.sequence(kind, epoch, i as u64))
            .collect::<Result<_>>()?;
        rows.extend(evaluate_batch(predictor, &batch)?.losses);
        progress(end);
        start = end;
    }
    EvalReport::from_rows(&rows)
}

/// Test-set evaluation of a model, with batch norm switched to its running
/// statistics for the duration.
pub fn evaluate_testset(model: &mut Vln, data: &MovingMnist, count: usize, batch_size: usize) -> Result<EvalReport> {
    let mode = model.bn_mode();
    model.set_bn_mode(BnMode::Eval);
    let r = evaluate_stream(&*model, data, StreamKind::Test, 0, count, batch_size, |_| {});
    model.set_bn_mode(mode);
    r
}
