//! RMSprop.

use crate::error::{Error, Result};
use crate::model::ParamStore;
use crate::tensor::Element;

/// One elementwise update:
/// `acc ← ρ·acc + (1−ρ)·g²`, `p ← p − lr·g / (√acc + ε)`.
/// Arithmetic is carried out in double precision.
pub fn rmsprop_update<T: Element>(
    params: &mut [T],
    grads: &[T],
    acc: &mut [T],
    lr: f64,
    rho: f64,
    eps: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != acc.len() {
        return Err(Error::shape(
            "rmsprop_update",
            format!(
                "params {}, grads {}, accumulators {} must have equal length",
                params.len(),
                grads.len(),
                acc.len()
            ),
        ));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::InvalidArgument(format!("rho {rho} outside (0, 1)")));
    }
    for ((p, &g), a) in params.iter_mut().zip(grads).zip(acc.iter_mut()) {
        let g = g.as_f64();
        let next = rho * a.as_f64() + (1.0 - rho) * g * g;
        *a = T::from_f64(next);
        *p = T::from_f64(p.as_f64() - lr * g / (next.sqrt() + eps));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct RmsProp {
    pub lr: f64,
    pub rho: f64,
    pub eps: f64,
    /// One accumulator per parameter, in store order.
    pub accumulators: Vec<Vec<f32>>,
}

impl RmsProp {
    pub fn new(store: &ParamStore<f32>, lr: f64, rho: f64, eps: f64) -> Self {
        RmsProp {
            lr,
            rho,
            eps,
            accumulators: store.parameters().iter().map(|p| vec![0.0; p.value.numel()]).collect(),
        }
    }

    /// Applies the accumulated gradients. Parameters without a gradient are
    /// updated as if it were zero. Returns whether any value changed.
    pub fn step(&mut self, store: &mut ParamStore<f32>) -> Result<bool> {
        if self.accumulators.len() != store.parameters().len() {
            return Err(Error::shape(
                "rmsprop",
                format!(
                    "{} accumulators for {} parameters",
                    self.accumulators.len(),
                    store.parameters().len()
                ),
            ));
        }
        let mut changed = false;
        for i in 0..self.accumulators.len() {
            let p = &store.parameters()[i].value;
            let grad = p.grad().unwrap_or_else(|| vec![0.0; p.numel()]);
            let mut values = p.to_vec();
            rmsprop_update(
                &mut values,
                &grad,
                &mut self.accumulators[i],
                self.lr,
                self.rho,
                self.eps,
            )?;
            changed |= values.as_slice() != p.data();
            store.set(i, values)?;
        }
        Ok(changed)
    }
}
