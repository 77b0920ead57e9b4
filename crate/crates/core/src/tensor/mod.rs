//! Dense NCHW tensors with reverse-mode automatic differentiation.
//!
//! A [`Tensor`] is an immutable, reference-counted node. Operations on tensors
//! that require gradients record a backward closure together with their
//! inputs; [`Tensor::backward`] walks the recorded graph in reverse
//! topological order and accumulates gradients into every leaf that asked for
//! them. Intermediate gradients live only for the duration of the walk.
//!
//! Values are generic over [`Element`] (`f32` for training, `f64` for
//! gradient checks and oracles).

mod conv;
mod element;
mod loss;
mod norm;
mod ops;

use std::cell::Cell;
use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

pub use conv::{conv2d, conv_output_extent, Conv2dOptions, Padding};
pub(crate) use element::matmul;
pub use element::Element;
pub use loss::{bce_loss, BCE_EPSILON};
pub use norm::{batch_norm, BatchNormMode, RunningStats};
pub use ops::{concat, concat_channels};

use crate::error::{Error, Result};

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

thread_local! {
    static GRAD_ENABLED: Cell<bool> = const { Cell::new(true) };
}

/// Disables graph recording on the current thread until the guard is dropped.
pub struct NoGradGuard {
    previous: bool,
}

impl Drop for NoGradGuard {
    fn drop(&mut self) {
        GRAD_ENABLED.with(|g| g.set(self.previous));
    }
}

pub fn no_grad() -> NoGradGuard {
    let previous = GRAD_ENABLED.with(|g| g.replace(false));
    NoGradGuard { previous }
}

pub fn grad_enabled() -> bool {
    GRAD_ENABLED.with(|g| g.get())
}

/// Inputs handed to a backward closure.
pub(crate) struct BackwardCtx<'a, T: Element> {
    pub grad: &'a [T],
    pub output: &'a [T],
    pub inputs: &'a [Tensor<T>],
}

type BackwardFn<T> = Box<dyn Fn(&BackwardCtx<'_, T>) -> Vec<Option<Vec<T>>> + Send + Sync>;

struct GradFn<T: Element> {
    name: &'static str,
    inputs: Vec<Tensor<T>>,
    backward: BackwardFn<T>,
}

struct Node<T: Element> {
    id: u64,
    shape: Vec<usize>,
    data: Vec<T>,
    requires_grad: bool,
    grad_fn: Option<GradFn<T>>,
    grad: Mutex<Option<Vec<T>>>,
}

/// Reference-counted tensor node. Cloning is cheap and shares storage.
pub struct Tensor<T: Element = f32> {
    node: Arc<Node<T>>,
}

impl<T: Element> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor {
            node: Arc::clone(&self.node),
        }
    }
}

impl<T: Element> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = f.debug_struct("Tensor");
        s.field("shape", &self.node.shape)
            .field("requires_grad", &self.node.requires_grad);
        if let Some(g) = &self.node.grad_fn {
            s.field("op", &g.name);
        }
        if self.node.data.len() <= 16 {
            s.field("data", &self.node.data);
        }
        s.finish()
    }
}

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl<T: Element> Tensor<T> {
    fn from_node(shape: Vec<usize>, data: Vec<T>, requires_grad: bool, grad_fn: Option<GradFn<T>>) -> Self {
        debug_assert_eq!(numel(&shape), data.len());
        Tensor {
            node: Arc::new(Node {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape,
                data,
                requires_grad,
                grad_fn,
                grad: Mutex::new(None),
            }),
        }
    }

    /// Builds a constant (non-differentiable) leaf.
    pub fn new(shape: &[usize], data: Vec<T>) -> Result<Self> {
        if numel(shape) != data.len() {
            return Err(Error::shape(
                "tensor",
                format!("shape {:?} holds {} values, got {}", shape, numel(shape), data.len()),
            ));
        }
        Ok(Self::from_node(shape.to_vec(), data, false, None))
    }

    /// Builds a trainable leaf whose gradient is accumulated by `backward`.
    pub fn parameter(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let t = Self::new(shape, data)?;
        Ok(Self::from_node(t.node.shape.clone(), t.into_data(), true, None))
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: &[usize], value: T) -> Self {
        Self::from_node(shape.to_vec(), vec![value; numel(shape)], false, None)
    }

    pub fn scalar(value: T) -> Self {
        Self::from_node(vec![], vec![value], false, None)
    }

    /// Result of an operation. The graph edge is recorded only when recording
    /// is enabled and some input requires a gradient.
    pub(crate) fn from_op<F>(
        name: &'static str,
        shape: Vec<usize>,
        data: Vec<T>,
        inputs: Vec<Tensor<T>>,
        backward: F,
    ) -> Self
    where
        F: Fn(&BackwardCtx<'_, T>) -> Vec<Option<Vec<T>>> + Send + Sync + 'static,
    {
        let track = grad_enabled() && inputs.iter().any(|t| t.requires_grad());
        if track {
            let grad_fn = GradFn {
                name,
                inputs,
                backward: Box::new(backward),
            };
            Self::from_node(shape, data, true, Some(grad_fn))
        } else {
            Self::from_node(shape, data, false, None)
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.node.shape
    }

    pub fn data(&self) -> &[T] {
        &self.node.data
    }

    pub fn numel(&self) -> usize {
        self.node.data.len()
    }

    pub fn requires_grad(&self) -> bool {
        self.node.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        self.node.grad_fn.is_none()
    }

    pub fn id(&self) -> u64 {
        self.node.id
    }

    /// Name of the producing operation, if recorded.
    pub fn op_name(&self) -> Option<&'static str> {
        self.node.grad_fn.as_ref().map(|g| g.name)
    }

    /// Copies the values out (storage is shared, so this always copies).
    pub fn to_vec(&self) -> Vec<T> {
        self.node.data.clone()
    }

    fn into_data(self) -> Vec<T> {
        match Arc::try_unwrap(self.node) {
            Ok(mut node) => std::mem::take(&mut node.data),
            Err(node) => node.data.clone(),
        }
    }

    /// Single value of a one-element tensor.
    pub fn item(&self) -> Result<T> {
        if self.numel() != 1 {
            return Err(Error::shape("item", format!("tensor has shape {:?}", self.shape())));
        }
        Ok(self.node.data[0])
    }

    /// Same values, cut from the graph.
    pub fn detach(&self) -> Self {
        Self::from_node(self.node.shape.clone(), self.node.data.clone(), false, None)
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Self> {
        if numel(shape) != self.numel() {
            return Err(Error::shape(
                "reshape",
                format!("cannot view {:?} as {:?}", self.shape(), shape),
            ));
        }
        Ok(Self::from_op(
            "reshape",
            shape.to_vec(),
            self.node.data.clone(),
            vec![self.clone()],
            |ctx| vec![Some(ctx.grad.to_vec())],
        ))
    }

    pub fn cast<U: Element>(&self) -> Tensor<U> {
        let data = self.node.data.iter().map(|&v| U::from_f64(v.as_f64())).collect();
        Tensor::from_node(self.node.shape.clone(), data, false, None)
    }

    /// Accumulated gradient of a leaf, if any backward pass reached it.
    pub fn grad(&self) -> Option<Vec<T>> {
        self.node.grad.lock().expect("grad lock poisoned").clone()
    }

    pub fn zero_grad(&self) {
        *self.node.grad.lock().expect("grad lock poisoned") = None;
    }

    fn accumulate_grad(&self, g: &[T]) {
        let mut slot = self.node.grad.lock().expect("grad lock poisoned");
        match slot.as_mut() {
            Some(acc) => acc.iter_mut().zip(g).for_each(|(a, &b)| *a = *a + b),
            None => *slot = Some(g.to_vec()),
        }
    }

    /// Reverse-mode sweep from a scalar. Gradients accumulate into leaves
    /// across repeated calls until [`Tensor::zero_grad`] is called.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(Error::shape(
                "backward",
                format!("loss must be a scalar, got shape {:?}", self.shape()),
            ));
        }
        if !self.requires_grad() {
            return Ok(());
        }
        let order = self.topological_order();
        let mut grads: HashMap<u64, Vec<T>> = HashMap::new();
        grads.insert(self.id(), vec![T::one()]);
        for t in order.iter().rev() {
            let Some(g) = grads.remove(&t.id()) else {
                continue;
            };
            match &t.node.grad_fn {
                None => t.accumulate_grad(&g),
                Some(f) => {
                    let ctx = BackwardCtx {
                        grad: &g,
                        output: &t.node.data,
                        inputs: &f.inputs,
                    };
                    let input_grads = (f.backward)(&ctx);
                    debug_assert_eq!(input_grads.len(), f.inputs.len(), "{}", f.name);
                    for (input, ig) in f.inputs.iter().zip(input_grads) {
                        let Some(ig) = ig else { continue };
                        if !input.requires_grad() {
                            continue;
                        }
                        debug_assert_eq!(ig.len(), input.numel(), "{}", f.name);
                        match grads.get_mut(&input.id()) {
                            Some(acc) => acc.iter_mut().zip(&ig).for_each(|(a, &b)| *a = *a + b),
                            None => {
                                grads.insert(input.id(), ig);
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Nodes reachable through recorded edges, each exactly once, inputs
    /// before the nodes that consume them.
    fn topological_order(&self) -> Vec<Tensor<T>> {
        let mut order = Vec::new();
        let mut visited = std::collections::HashSet::new();
        // (node, children already pushed)
        let mut stack: Vec<(Tensor<T>, bool)> = vec![(self.clone(), false)];
        while let Some((t, expanded)) = stack.pop() {
            if expanded {
                order.push(t);
                continue;
            }
            if !visited.insert(t.id()) {
                continue;
            }
            stack.push((t.clone(), true));
            if let Some(f) = &t.node.grad_fn {
                for input in &f.inputs {
                    if input.requires_grad() && !visited.contains(&input.id()) {
                        stack.push((input.clone(), false));
                    }
                }
            }
        }
        order
    }

    pub(crate) fn expect_rank(&self, op: &'static str, rank: usize) -> Result<()> {
        if self.shape().len() != rank {
            return Err(Error::shape(
                op,
                format!("expected rank {rank}, got shape {:?}", self.shape()),
            ));
        }
        Ok(())
    }

    /// True if every value is finite.
    pub fn all_finite(&self) -> bool {
        self.node.data.iter().all(|v| v.is_finite())
    }
}

impl<T: Element> Drop for Node<T> {
    // Long recurrent graphs would otherwise drop recursively, one stack frame
    // per node.
    fn drop(&mut self) {
        let Some(f) = self.grad_fn.take() else { return };
        let mut pending: Vec<Tensor<T>> = f.inputs;
        while let Some(t) = pending.pop() {
            if let Ok(mut node) = Arc::try_unwrap(t.node) {
                if let Some(g) = node.grad_fn.take() {
                    pending.extend(g.inputs);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn backward_of_scaled_sum_is_constant() {
        let x = Tensor::<f64>::parameter(&[2, 3], vec![0.5, -1.0, 2.0, 3.0, 0.0, 1.0]).unwrap();
        let loss = x.scale(2.0).sum();
        loss.backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![2.0; 6]);
    }

    #[test]
    fn repeated_backward_accumulates_until_zeroed() {
        let x = Tensor::<f64>::parameter(&[3], vec![1.0, 2.0, 3.0]).unwrap();
        let loss = x.mul(&x).unwrap().sum();
        loss.backward().unwrap();
        loss.backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![4.0, 8.0, 12.0]);
        x.zero_grad();
        assert!(x.grad().is_none());
    }

    #[test]
    fn disconnected_parameter_gets_no_gradient() {
        let x = Tensor::<f64>::parameter(&[2], vec![1.0, 2.0]).unwrap();
        let unused = Tensor::<f64>::parameter(&[2], vec![3.0, 4.0]).unwrap();
        x.sum().backward().unwrap();
        assert!(unused.grad().unwrap_or_else(|| vec![0.0; 2]).iter().all(|&g| g == 0.0));
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let x = Tensor::<f32>::parameter(&[2], vec![1.0, 2.0]).unwrap();
        assert!(matches!(x.backward(), Err(Error::Shape { .. })));
    }

    #[test]
    fn shared_subexpression_visited_once() {
        // y = x*x is consumed twice; each path must contribute exactly once.
        let x = Tensor::<f64>::parameter(&[1], vec![3.0]).unwrap();
        let y = x.mul(&x).unwrap();
        let loss = y.add(&y).unwrap().sum();
        loss.backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![12.0]);
    }

    #[test]
    fn no_grad_records_nothing() {
        let x = Tensor::<f32>::parameter(&[2], vec![1.0, 2.0]).unwrap();
        let y = {
            let _g = no_grad();
            x.sigmoid()
        };
        assert!(!y.requires_grad());
        assert!(grad_enabled());
    }

    #[test]
    fn new_rejects_mismatched_length() {
        assert!(Tensor::<f32>::new(&[2, 2], vec![1.0; 3]).is_err());
    }

    #[test]
    fn long_chain_drops_without_overflow() {
        let x = Tensor::<f32>::parameter(&[1], vec![0.1]).unwrap();
        let mut y = x.clone();
        for _ in 0..200_000 {
            y = y.scale(1.0);
        }
        drop(y);
    }
}
