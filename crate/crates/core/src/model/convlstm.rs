//! Convolutional LSTM cell.
//!
//! ```text
//! i = σ(z∗W_zi + h∗W_hi + b_i)
//! f = σ(z∗W_zf + h∗W_hf + b_f)
//! o = σ(z∗W_zo + h∗W_ho + b_o)
//! c̃ = tanh(z∗W_zc̃ + h∗W_hc̃ + b_c̃)
//! c' = c̃⊙i + c⊙f
//! h' = o⊙tanh(c')
//! ```
//!
//! All kernels are 3×3, stride 1, dilation 1, same padding. The four gate
//! kernels of each input are concatenated so that each step runs one
//! convolution per input.

use super::layers::Ctx;
use super::params::{ParamBuilder, ParamId};
use crate::error::{Error, Result};
use crate::tensor::{concat, conv2d, Conv2dOptions, Element, Tensor};

pub const GATES: [&str; 4] = ["i", "f", "o", "c"];
pub const FORGET_BIAS: f32 = 1.0;

/// Hidden and cell maps carried between steps.
#[derive(Debug, Clone)]
pub struct ConvLstmState<T: Element = f32> {
    pub hidden: Tensor<T>,
    pub cell: Tensor<T>,
}

impl<T: Element> ConvLstmState<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        ConvLstmState {
            hidden: Tensor::zeros(shape),
            cell: Tensor::zeros(shape),
        }
    }

    pub fn detach(&self) -> Self {
        ConvLstmState {
            hidden: self.hidden.detach(),
            cell: self.cell.detach(),
        }
    }
}

/// Kernels and biases of one cell, in gate order i, f, o, c̃.
#[derive(Debug, Clone)]
pub struct ConvLstmWeights<T: Element = f32> {
    /// `[C_h, C_z, 3, 3]` each.
    pub w_z: [Tensor<T>; 4],
    /// `[C_h, C_h, 3, 3]` each.
    pub w_h: [Tensor<T>; 4],
    /// `[C_h]` each.
    pub b: [Tensor<T>; 4],
}

impl<T: Element> ConvLstmWeights<T> {
    pub fn hidden_channels(&self) -> usize {
        self.w_z[0].shape()[0]
    }

    pub fn input_channels(&self) -> usize {
        self.w_z[0].shape()[1]
    }
}

/// One cell update. `state = None` is the all-zero initial state; it skips
/// the recurrent convolution, which would contribute exactly zero.
pub fn convlstm_step<T: Element>(
    weights: &ConvLstmWeights<T>,
    z: &Tensor<T>,
    state: Option<&ConvLstmState<T>>,
) -> Result<ConvLstmState<T>> {
    z.expect_rank("convlstm_step", 4)?;
    let ch = weights.hidden_channels();
    if z.shape()[1] != weights.input_channels() {
        return Err(Error::shape(
            "convlstm_step",
            format!(
                "input has {} channels, cell kernels expect {}",
                z.shape()[1],
                weights.input_channels()
            ),
        ));
    }
    let expected = [z.shape()[0], ch, z.shape()[2], z.shape()[3]];
    if let Some(s) = state {
        if s.hidden.shape() != expected || s.cell.shape() != expected {
            return Err(Error::shape(
                "convlstm_step",
                format!(
                    "state hidden {:?} / cell {:?} must both be {expected:?}",
                    s.hidden.shape(),
                    s.cell.shape()
                ),
            ));
        }
    }
    let opts = Conv2dOptions::default();
    let wz = concat(&weights.w_z.each_ref(), 0)?;
    let b = concat(&weights.b.each_ref(), 0)?;
    let mut pre = conv2d(z, &wz, Some(&b), opts)?;
    if let Some(s) = state {
        let wh = concat(&weights.w_h.each_ref(), 0)?;
        pre = pre.add(&conv2d(&s.hidden, &wh, None, opts)?)?;
    }
    let i = pre.slice_channels(0, ch)?.sigmoid();
    let f = pre.slice_channels(ch, ch)?.sigmoid();
    let o = pre.slice_channels(2 * ch, ch)?.sigmoid();
    let c_tilde = pre.slice_channels(3 * ch, ch)?.tanh();
    let mut cell = c_tilde.mul(&i)?;
    if let Some(s) = state {
        cell = cell.add(&s.cell.mul(&f)?)?;
    }
    let hidden = o.mul(&cell.tanh())?;
    Ok(ConvLstmState { hidden, cell })
}

/// Parameter handles of a cell inside a model.
#[derive(Debug, Clone)]
pub struct ConvLstmCell {
    pub w_z: [ParamId; 4],
    pub w_h: [ParamId; 4],
    pub b: [ParamId; 4],
    pub hidden_channels: usize,
}

impl ConvLstmCell {
    /// Names `{prefix}.w_zi`, …, `{prefix}.w_hc`, `{prefix}.b_i`, …; the
    /// forget bias starts at +1.
    pub fn new(pb: &mut ParamBuilder, prefix: &str, input_channels: usize, hidden_channels: usize) -> Self {
        let w_z = GATES.map(|g| pb.kernel(format!("{prefix}.w_z{g}"), [hidden_channels, input_channels, 3, 3]));
        let w_h = GATES.map(|g| pb.kernel(format!("{prefix}.w_h{g}"), [hidden_channels, hidden_channels, 3, 3]));
        let b = GATES.map(|g| {
            let v = if g == "f" { FORGET_BIAS } else { 0.0 };
            pb.constant(format!("{prefix}.b_{g}"), hidden_channels, v)
        });
        ConvLstmCell {
            w_z,
            w_h,
            b,
            hidden_channels,
        }
    }

    pub fn weights<T: Element>(&self, ctx: &Ctx<'_, T>) -> ConvLstmWeights<T> {
        ConvLstmWeights {
            w_z: self.w_z.map(|id| ctx.p(id).clone()),
            w_h: self.w_h.map(|id| ctx.p(id).clone()),
            b: self.b.map(|id| ctx.p(id).clone()),
        }
    }

    pub fn step<T: Element>(
        &self,
        ctx: &Ctx<'_, T>,
        z: &Tensor<T>,
        state: Option<&ConvLstmState<T>>,
    ) -> Result<ConvLstmState<T>> {
        convlstm_step(&self.weights(ctx), z, state)
    }
}
