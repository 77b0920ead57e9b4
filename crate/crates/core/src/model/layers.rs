//! Building blocks shared by the encoders and decoders.

use super::params::{ParamBuilder, ParamId, ParamStore, StatsId};
use crate::error::Result;
use crate::tensor::{batch_norm, conv2d, BatchNormMode, Conv2dOptions, Element, Tensor};

/// How batch-norm layers normalize during a forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    /// Batch statistics; running statistics are updated.
    Train,
    /// Stored running statistics; nothing is updated.
    Eval,
}

/// Everything a layer needs to run forward.
pub struct Ctx<'a, T: Element> {
    pub store: &'a ParamStore<T>,
    pub bn: BnMode,
    pub slope: T,
    pub bn_epsilon: f64,
    pub bn_momentum: f64,
}

impl<T: Element> Ctx<'_, T> {
    pub fn p(&self, id: ParamId) -> &Tensor<T> {
        self.store.get(id)
    }
}

#[derive(Debug, Clone)]
pub struct Conv {
    pub kernel: ParamId,
    pub bias: Option<ParamId>,
    pub opts: Conv2dOptions,
}

impl Conv {
    pub fn new(
        b: &mut ParamBuilder,
        prefix: &str,
        cin: usize,
        cout: usize,
        k: usize,
        opts: Conv2dOptions,
        bias: bool,
    ) -> Self {
        let kernel = b.kernel(format!("{prefix}.kernel"), [cout, cin, k, k]);
        let bias = bias.then(|| b.constant(format!("{prefix}.bias"), cout, 0.0));
        Conv { kernel, bias, opts }
    }

    /// 1×1 convolution with bias.
    pub fn pointwise(b: &mut ParamBuilder, prefix: &str, cin: usize, cout: usize) -> Self {
        Self::new(b, prefix, cin, cout, 1, Conv2dOptions::default(), true)
    }

    pub fn forward<T: Element>(&self, ctx: &Ctx<'_, T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        conv2d(x, ctx.p(self.kernel), self.bias.map(|b| ctx.p(b)), self.opts)
    }
}

#[derive(Debug, Clone)]
pub struct BatchNorm {
    pub scale: ParamId,
    pub shift: ParamId,
    pub stats: StatsId,
}

impl BatchNorm {
    pub fn new(b: &mut ParamBuilder, prefix: &str, channels: usize) -> Self {
        BatchNorm {
            scale: b.constant(format!("{prefix}.scale"), channels, 1.0),
            shift: b.constant(format!("{prefix}.shift"), channels, 0.0),
            stats: b.stats(prefix, channels),
        }
    }

    pub fn forward<T: Element>(&self, ctx: &Ctx<'_, T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut slot = ctx.store.stats[self.stats.0].running.lock().unwrap();
        let mode = match ctx.bn {
            BnMode::Train => BatchNormMode::Train {
                running: Some(&mut slot),
                momentum: ctx.bn_momentum,
            },
            BnMode::Eval => BatchNormMode::Eval { running: slot.as_ref() },
        };
        batch_norm(x, ctx.p(self.scale), ctx.p(self.shift), mode, ctx.bn_epsilon)
    }
}

/// conv (no bias) → batch norm → leaky ReLU.
#[derive(Debug, Clone)]
pub struct ConvBnAct {
    pub conv: Conv,
    pub bn: BatchNorm,
}

impl ConvBnAct {
    pub fn new(b: &mut ParamBuilder, prefix: &str, cin: usize, cout: usize, k: usize, opts: Conv2dOptions) -> Self {
        ConvBnAct {
            conv: Conv::new(b, &format!("{prefix}.conv"), cin, cout, k, opts, false),
            bn: BatchNorm::new(b, &format!("{prefix}.bn"), cout),
        }
    }

    pub fn forward<T: Element>(&self, ctx: &Ctx<'_, T>, x: &Tensor<T>) -> Result<Tensor<T>> {
        let y = self.conv.forward(ctx, x)?;
        Ok(self.bn.forward(ctx, &y)?.leaky_relu(ctx.slope))
    }
}

/// Optional record of intermediate tensor shapes during a forward pass.
#[derive(Debug, Clone, Default)]
pub struct ShapeTrace {
    enabled: bool,
    pub entries: Vec<(String, Vec<usize>)>,
}

impl ShapeTrace {
    pub fn disabled() -> Self {
        ShapeTrace::default()
    }

    pub fn enabled() -> Self {
        ShapeTrace {
            enabled: true,
            entries: Vec::new(),
        }
    }

    pub fn record<T: Element>(&mut self, name: impl FnOnce() -> String, t: &Tensor<T>) {
        if self.enabled {
            self.entries.push((name(), t.shape().to_vec()));
        }
    }

    pub fn get(&self, name: &str) -> Option<&[usize]> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, s)| s.as_slice())
    }
}
