//! Lateral merge of the decoder input with the recurrent and feedforward
//! laterals of one level:
//!
//! ```text
//! out = LReLU( ( LReLU( (above, h) ∗ W_h ), z ) ∗ W_z )
//! ```
//!
//! `(a, b)` is channel concatenation, `W_h` and `W_z` are 1×1 convolutions
//! with bias. Absent operands drop out of their concatenation; when both
//! `above` and `h` are absent the first stage is skipped.

use super::layers::{Conv, Ctx};
use super::params::ParamBuilder;
use crate::error::{Error, Result};
use crate::tensor::{concat, conv2d, Conv2dOptions, Element, Tensor};

/// Kernel `[Cout, Cin, 1, 1]` and bias `[Cout]`.
pub type Pointwise<T> = (Tensor<T>, Tensor<T>);

#[derive(Debug, Clone)]
pub struct MergeWeights<T: Element = f32> {
    pub w_h: Option<Pointwise<T>>,
    pub w_z: Pointwise<T>,
}

fn cat<T: Element>(a: Option<&Tensor<T>>, b: Option<&Tensor<T>>) -> Result<Option<Tensor<T>>> {
    Ok(match (a, b) {
        (Some(a), Some(b)) => Some(concat(&[a, b], 1)?),
        (Some(x), None) | (None, Some(x)) => Some(x.clone()),
        (None, None) => None,
    })
}

pub fn lateral_merge<T: Element>(
    weights: &MergeWeights<T>,
    above: Option<&Tensor<T>>,
    recurrent: Option<&Tensor<T>>,
    feedforward: Option<&Tensor<T>>,
    slope: T,
) -> Result<Tensor<T>> {
    let opts = Conv2dOptions::default();
    let first = match (cat(above, recurrent)?, &weights.w_h) {
        (Some(x), Some((k, b))) => Some(conv2d(&x, k, Some(b), opts)?.leaky_relu(slope)),
        (None, None) => None,
        (Some(_), None) => {
            return Err(Error::Config(
                "lateral merge received decoder/recurrent input but has no W_h".into(),
            ))
        }
        (None, Some(_)) => {
            return Err(Error::Config(
                "lateral merge has W_h but received neither decoder nor recurrent input".into(),
            ))
        }
    };
    let second =
        cat(first.as_ref(), feedforward)?.ok_or_else(|| Error::Config("lateral merge received no inputs".into()))?;
    let (k, b) = &weights.w_z;
    Ok(conv2d(&second, k, Some(b), opts)?.leaky_relu(slope))
}

/// Parameter handles of a merge block inside a model.
#[derive(Debug, Clone)]
pub struct Merge {
    pub w_h: Option<Conv>,
    pub w_z: Conv,
}

impl Merge {
    /// `first_in` is the channel count of `(above, h)` (0 when both are
    /// absent), `ff_in` that of `z` (0 when absent).
    pub fn new(pb: &mut ParamBuilder, prefix: &str, first_in: usize, ff_in: usize, out: usize) -> Self {
        let w_h = (first_in > 0).then(|| Conv::pointwise(pb, &format!("{prefix}.w_h"), first_in, out));
        let second_in = if first_in > 0 { out } else { 0 } + ff_in;
        let w_z = Conv::pointwise(pb, &format!("{prefix}.w_z"), second_in, out);
        Merge { w_h, w_z }
    }

    pub fn weights<T: Element>(&self, ctx: &Ctx<'_, T>) -> MergeWeights<T> {
        let pw = |c: &Conv| {
            (
                ctx.p(c.kernel).clone(),
                ctx.p(c.bias.expect("pointwise has bias")).clone(),
            )
        };
        MergeWeights {
            w_h: self.w_h.as_ref().map(pw),
            w_z: pw(&self.w_z),
        }
    }

    pub fn forward<T: Element>(
        &self,
        ctx: &Ctx<'_, T>,
        above: Option<&Tensor<T>>,
        recurrent: Option<&Tensor<T>>,
        feedforward: Option<&Tensor<T>>,
    ) -> Result<Tensor<T>> {
        lateral_merge(&self.weights(ctx), above, recurrent, feedforward, ctx.slope)
    }
}
