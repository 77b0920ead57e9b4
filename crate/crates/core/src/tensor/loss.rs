use super::{Element, Tensor};
use crate::error::{Error, Result};

/// Predictions are clamped to `[BCE_EPSILON, 1 − BCE_EPSILON]` before the log.
pub const BCE_EPSILON: f64 = 1e-7;

/// Pixel-summed binary cross-entropy per batch element.
///
/// `prediction` and `target` share a shape `[N, ...]`; the result has shape
/// `[N]` with `−Σ t·ln p + (1−t)·ln(1−p)` over each element's pixels.
/// Targets are treated as Bernoulli probabilities and must lie in `[0, 1]`.
pub fn bce_loss<T: Element>(prediction: &Tensor<T>, target: &Tensor<T>) -> Result<Tensor<T>> {
    if prediction.shape() != target.shape() || prediction.shape().is_empty() {
        return Err(Error::shape(
            "bce_loss",
            format!("prediction {:?} vs target {:?}", prediction.shape(), target.shape()),
        ));
    }
    if let Some(bad) = target.data().iter().find(|&&t| !(t >= T::zero() && t <= T::one())) {
        return Err(Error::InvalidArgument(format!(
            "bce_loss target value {bad} outside [0, 1]"
        )));
    }
    let n = prediction.shape()[0];
    let per = prediction.numel() / n.max(1);
    let (lo, hi) = (BCE_EPSILON, 1.0 - BCE_EPSILON);
    let p = prediction.data();
    let t = target.data();
    let mut losses = Vec::with_capacity(n);
    for b in 0..n {
        let mut acc = 0.0;
        for i in b * per..(b + 1) * per {
            let pc = p[i].as_f64().clamp(lo, hi);
            let tv = t[i].as_f64();
            acc -= tv * pc.ln() + (1.0 - tv) * (1.0 - pc).ln();
        }
        losses.push(T::from_f64(acc));
    }
    let target = target.clone();
    Ok(Tensor::from_op(
        "bce_loss",
        vec![n],
        losses,
        vec![prediction.clone()],
        move |ctx| {
            let p = ctx.inputs[0].data();
            let t = target.data();
            let g = (0..p.len())
                .map(|i| {
                    let pv = p[i].as_f64();
                    if pv < lo || pv > hi {
                        return T::zero();
                    }
                    let tv = t[i].as_f64();
                    let d = -(tv / pv) + (1.0 - tv) / (1.0 - pv);
                    T::from_f64(d * ctx.grad[i / per].as_f64())
                })
                .collect();
            vec![Some(g)]
        },
    ))
}
