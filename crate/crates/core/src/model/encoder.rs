//! Bottom-up path: each level halves the resolution.

use super::config::{ModelConfig, KERNEL_SIZE};
use super::layers::{Conv, ConvBnAct, Ctx, ShapeTrace};
use super::params::ParamBuilder;
use crate::error::Result;
use crate::tensor::{Conv2dOptions, Element, Tensor};

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum EncoderLevel {
    /// Dilated stride-2 conv → BN → LReLU.
    Plain(ConvBnAct),
    /// Two dilated conv → BN → LReLU layers plus a skip (projected by a 1×1
    /// conv when the channel count changes), then a stride-2 conv → BN →
    /// LReLU.
    Residual {
        a: ConvBnAct,
        b: ConvBnAct,
        skip: Option<Conv>,
        down: ConvBnAct,
    },
}

#[derive(Debug, Clone)]
pub struct Encoder {
    pub levels: Vec<EncoderLevel>,
}

impl Encoder {
    pub fn new(cfg: &ModelConfig, pb: &mut ParamBuilder) -> Self {
        let k = KERNEL_SIZE;
        let mut cin = 1;
        let levels = (0..cfg.levels())
            .map(|l| {
                let prefix = format!("encoder.level{}", l + 1);
                let level = if cfg.variant.is_residual() {
                    let (fa, fb) = (cfg.encoder_filters[2 * l], cfg.encoder_filters[2 * l + 1]);
                    let (da, db) = (cfg.encoder_dilations[2 * l], cfg.encoder_dilations[2 * l + 1]);
                    let a = ConvBnAct::new(
                        pb,
                        &format!("{prefix}.a"),
                        cin,
                        fa,
                        k,
                        Conv2dOptions::default().dilation(da),
                    );
                    let b = ConvBnAct::new(
                        pb,
                        &format!("{prefix}.b"),
                        fa,
                        fb,
                        k,
                        Conv2dOptions::default().dilation(db),
                    );
                    let skip = (cin != fb).then(|| Conv::pointwise(pb, &format!("{prefix}.skip"), cin, fb));
                    let down = ConvBnAct::new(
                        pb,
                        &format!("{prefix}.down"),
                        fb,
                        fb,
                        k,
                        Conv2dOptions::default().stride(2),
                    );
                    cin = fb;
                    EncoderLevel::Residual { a, b, skip, down }
                } else {
                    let c = cfg.encoder_filters[l];
                    let opts = Conv2dOptions::default().stride(2).dilation(cfg.encoder_dilations[l]);
                    let layer = ConvBnAct::new(pb, &prefix, cin, c, k, opts);
                    cin = c;
                    EncoderLevel::Plain(layer)
                };
                level
            })
            .collect();
        Encoder { levels }
    }

    /// Per-level features `z¹ … z^L`.
    pub fn forward<T: Element>(
        &self,
        ctx: &Ctx<'_, T>,
        frame: &Tensor<T>,
        trace: &mut ShapeTrace,
    ) -> Result<Vec<Tensor<T>>> {
        let mut x = frame.clone();
        let mut out = Vec::with_capacity(self.levels.len());
        for (l, level) in self.levels.iter().enumerate() {
            x = match level {
                EncoderLevel::Plain(layer) => layer.forward(ctx, &x)?,
                EncoderLevel::Residual { a, b, skip, down } => {
                    let ya = a.forward(ctx, &x)?;
                    trace.record(|| format!("encoder.level{}.a", l + 1), &ya);
                    let yb = b.forward(ctx, &ya)?;
                    trace.record(|| format!("encoder.level{}.b", l + 1), &yb);
                    let s = match skip {
                        Some(p) => p.forward(ctx, &x)?,
                        None => x.clone(),
                    };
                    let block = yb.add(&s)?;
                    trace.record(|| format!("encoder.level{}.block", l + 1), &block);
                    down.forward(ctx, &block)?
                }
            };
            trace.record(|| format!("z{}", l + 1), &x);
            out.push(x.clone());
        }
        Ok(out)
    }
}
