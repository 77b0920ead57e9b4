//! Top-down path: each level upsamples ×2 and convolves down to the channel
//! count of the level below; the bottom level emits one sigmoid channel.

use super::config::{ModelConfig, KERNEL_SIZE};
use super::layers::{Conv, ConvBnAct, Ctx, ShapeTrace};
use super::params::ParamBuilder;
use crate::error::Result;
use crate::tensor::{Conv2dOptions, Element, Tensor};

pub const UPSAMPLE_FACTOR: usize = 2;

#[derive(Debug, Clone)]
pub enum DecoderLevel {
    /// conv → BN → LReLU.
    Plain(ConvBnAct),
    /// conv with bias → sigmoid (bottom level of the plain decoder).
    Output(Conv),
    /// Two conv → BN → LReLU layers plus a (projected) skip.
    Residual {
        a: ConvBnAct,
        b: ConvBnAct,
        skip: Option<Conv>,
    },
}

#[derive(Debug, Clone)]
pub struct Decoder {
    /// Indexed by level, bottom first.
    pub levels: Vec<DecoderLevel>,
    /// Final conv → sigmoid of the residual decoder.
    pub output: Option<Conv>,
}

impl Decoder {
    pub fn new(cfg: &ModelConfig, pb: &mut ParamBuilder) -> Self {
        let k = KERNEL_SIZE;
        let opts = Conv2dOptions::default();
        let levels_n = cfg.levels();
        let mut levels: Vec<Option<DecoderLevel>> = vec![None; levels_n];
        for l in (0..levels_n).rev() {
            let prefix = format!("decoder.level{}", l + 1);
            let cin = cfg.level_channels(l);
            let level = if cfg.variant.is_residual() {
                let cout = cfg.level_channels(l.saturating_sub(1));
                let a = ConvBnAct::new(pb, &format!("{prefix}.a"), cin, cout, k, opts);
                let b = ConvBnAct::new(pb, &format!("{prefix}.b"), cout, cout, k, opts);
                let skip = (cin != cout).then(|| Conv::pointwise(pb, &format!("{prefix}.skip"), cin, cout));
                DecoderLevel::Residual { a, b, skip }
            } else if l == 0 {
                DecoderLevel::Output(Conv::new(pb, &format!("{prefix}.conv"), cin, 1, k, opts, true))
            } else {
                DecoderLevel::Plain(ConvBnAct::new(pb, &prefix, cin, cfg.level_channels(l - 1), k, opts))
            };
            levels[l] = Some(level);
        }
        let output = cfg
            .variant
            .is_residual()
            .then(|| Conv::new(pb, "decoder.output", cfg.level_channels(0), 1, k, opts, true));
        Decoder {
            levels: levels.into_iter().map(|l| l.expect("every level built")).collect(),
            output,
        }
    }

    /// Upsamples the merged map of level `l` and applies that level's layers.
    pub fn level_forward<T: Element>(
        &self,
        ctx: &Ctx<'_, T>,
        l: usize,
        merged: &Tensor<T>,
        trace: &mut ShapeTrace,
    ) -> Result<Tensor<T>> {
        let up = merged.upsample_nearest(UPSAMPLE_FACTOR)?;
        trace.record(|| format!("decoder.level{}.upsampled", l + 1), &up);
        let mut y = match &self.levels[l] {
            DecoderLevel::Plain(layer) => layer.forward(ctx, &up)?,
            DecoderLevel::Output(conv) => conv.forward(ctx, &up)?.sigmoid(),
            DecoderLevel::Residual { a, b, skip } => {
                let ya = a.forward(ctx, &up)?;
                let yb = b.forward(ctx, &ya)?;
                let s = match skip {
                    Some(p) => p.forward(ctx, &up)?,
                    None => up.clone(),
                };
                yb.add(&s)?
            }
        };
        trace.record(|| format!("decoder.level{}", l + 1), &y);
        if l == 0 {
            if let Some(out) = &self.output {
                y = out.forward(ctx, &y)?.sigmoid();
                trace.record(|| "decoder.output".into(), &y);
            }
        }
        Ok(y)
    }
}
