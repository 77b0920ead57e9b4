use super::{Element, Tensor};
use crate::error::{Error, Result};

/// Per-channel running mean and (unbiased) variance, stored in single
/// precision so that checkpoints hold them exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<f32>,
    pub var: Vec<f32>,
}

#[derive(Debug)]
pub enum BatchNormMode<'a> {
    /// Normalise with batch statistics and fold them into `running` with
    /// `running = momentum·running + (1−momentum)·batch`. The first update
    /// of an empty slot copies the batch statistics.
    Train {
        running: Option<&'a mut Option<RunningStats>>,
        momentum: f64,
    },
    /// Normalise with stored statistics.
    Eval { running: Option<&'a RunningStats> },
}

/// Batch normalisation over (N, H, W) for each channel of an NCHW tensor.
pub fn batch_norm<T: Element>(
    input: &Tensor<T>,
    scale: &Tensor<T>,
    shift: &Tensor<T>,
    mode: BatchNormMode<'_>,
    epsilon: f64,
) -> Result<Tensor<T>> {
    input.expect_rank("batch_norm", 4)?;
    let (n, c, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2], input.shape()[3]);
    if scale.shape() != [c] || shift.shape() != [c] {
        return Err(Error::shape(
            "batch_norm",
            format!(
                "scale {:?} / shift {:?} must both be [{c}]",
                scale.shape(),
                shift.shape()
            ),
        ));
    }
    let hw = h * w;
    let count = n * hw;
    let x = input.data();
    let channel = move |ci: usize| (0..n).flat_map(move |b| (b * c + ci) * hw..(b * c + ci + 1) * hw);

    match mode {
        BatchNormMode::Train { running, momentum } => {
            if count < 2 {
                return Err(Error::InvalidArgument(format!(
                    "batch_norm in train mode needs N·H·W >= 2, got {count}"
                )));
            }
            let mut mean = vec![0.0; c];
            let mut var = vec![0.0; c];
            for ci in 0..c {
                let m = channel(ci).map(|i| x[i].as_f64()).sum::<f64>() / count as f64;
                let v = channel(ci).map(|i| (x[i].as_f64() - m).powi(2)).sum::<f64>() / count as f64;
                mean[ci] = m;
                var[ci] = v;
            }
            if let Some(slot) = running {
                let unbiased = count as f64 / (count - 1) as f64;
                match slot {
                    Some(rs) => {
                        for ci in 0..c {
                            rs.mean[ci] = (momentum * rs.mean[ci] as f64 + (1.0 - momentum) * mean[ci]) as f32;
                            rs.var[ci] = (momentum * rs.var[ci] as f64 + (1.0 - momentum) * var[ci] * unbiased) as f32;
                        }
                    }
                    None => {
                        *slot = Some(RunningStats {
                            mean: mean.iter().map(|&m| m as f32).collect(),
                            var: var.iter().map(|v| (v * unbiased) as f32).collect(),
                        })
                    }
                }
            }
            let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + epsilon).sqrt()).collect();
            let mut xhat = vec![T::zero(); x.len()];
            let mut out = vec![T::zero(); x.len()];
            for ci in 0..c {
                let (g, b) = (scale.data()[ci], shift.data()[ci]);
                let (m, s) = (mean[ci], inv_std[ci]);
                for i in channel(ci) {
                    let xh = T::from_f64((x[i].as_f64() - m) * s);
                    xhat[i] = xh;
                    out[i] = g * xh + b;
                }
            }
            Ok(Tensor::from_op(
                "batch_norm_train",
                input.shape().to_vec(),
                out,
                vec![input.clone(), scale.clone(), shift.clone()],
                move |ctx| {
                    let gy = ctx.grad;
                    let gamma = ctx.inputs[1].data();
                    let mut dx = vec![T::zero(); gy.len()];
                    let mut dscale = vec![T::zero(); c];
                    let mut dshift = vec![T::zero(); c];
                    for ci in 0..c {
                        let mut sum_g = 0.0;
                        let mut sum_gx = 0.0;
                        for i in channel(ci) {
                            sum_g += gy[i].as_f64();
                            sum_gx += gy[i].as_f64() * xhat[i].as_f64();
                        }
                        dshift[ci] = T::from_f64(sum_g);
                        dscale[ci] = T::from_f64(sum_gx);
                        let k = gamma[ci].as_f64() * inv_std[ci] / count as f64;
                        for i in channel(ci) {
                            let v = count as f64 * gy[i].as_f64() - sum_g - xhat[i].as_f64() * sum_gx;
                            dx[i] = T::from_f64(k * v);
                        }
                    }
                    vec![Some(dx), Some(dscale), Some(dshift)]
                },
            ))
        }
        BatchNormMode::Eval { running } => {
            let rs = running.ok_or_else(|| {
                Error::InvalidArgument(
                    "batch_norm in eval mode requires running statistics; none have been collected".into(),
                )
            })?;
            if rs.mean.len() != c || rs.var.len() != c {
                return Err(Error::shape(
                    "batch_norm",
                    format!("running statistics hold {} channels, input has {c}", rs.mean.len()),
                ));
            }
            let inv_std: Vec<f64> = rs.var.iter().map(|&v| 1.0 / (v as f64 + epsilon).sqrt()).collect();
            let mean: Vec<f64> = rs.mean.iter().map(|&m| m as f64).collect();
            let mut out = vec![T::zero(); x.len()];
            for ci in 0..c {
                let (g, b) = (scale.data()[ci], shift.data()[ci]);
                for i in channel(ci) {
                    out[i] = g * T::from_f64((x[i].as_f64() - mean[ci]) * inv_std[ci]) + b;
                }
            }
            Ok(Tensor::from_op(
                "batch_norm_eval",
                input.shape().to_vec(),
                out,
                vec![input.clone(), scale.clone(), shift.clone()],
                move |ctx| {
                    let gy = ctx.grad;
                    let x = ctx.inputs[0].data();
                    let gamma = ctx.inputs[1].data();
                    let mut dx = vec![T::zero(); gy.len()];
                    let mut dscale = vec![T::zero(); c];
                    let mut dshift = vec![T::zero(); c];
                    for ci in 0..c {
                        let mut sg = 0.0;
                        let mut sgx = 0.0;
                        let k = gamma[ci].as_f64() * inv_std[ci];
                        for i in channel(ci) {
                            let g = gy[i].as_f64();
                            sg += g;
                            sgx += g * (x[i].as_f64() - mean[ci]) * inv_std[ci];
                            dx[i] = T::from_f64(g * k);
                        }
                        dshift[ci] = T::from_f64(sg);
                        dscale[ci] = T::from_f64(sgx);
                    }
                    vec![Some(dx), Some(dscale), Some(dshift)]
                },
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn affine(c: usize, g: f64, b: f64) -> (Tensor<f64>, Tensor<f64>) {
        (Tensor::full(&[c], g), Tensor::full(&[c], b))
    }

    #[test]
    fn train_mode_standardises_each_channel() {
        let data: Vec<f64> = (0..2 * 3 * 4 * 4)
            .map(|i| ((i * 37 % 101) as f64).sin() * 3.0 + i as f64 * 0.1)
            .collect();
        let x = Tensor::new(&[2, 3, 4, 4], data).unwrap();
        let (g, b) = affine(3, 1.0, 0.0);
        let y = batch_norm(
            &x,
            &g,
            &b,
            BatchNormMode::Train {
                running: None,
                momentum: 0.99,
            },
            1e-5,
        )
        .unwrap();
        for ci in 0..3 {
            let vals: Vec<f64> = (0..2)
                .flat_map(|n| y.data()[(n * 3 + ci) * 16..(n * 3 + ci + 1) * 16].to_vec())
                .collect();
            let m = vals.iter().sum::<f64>() / 32.0;
            let v = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / 32.0;
            assert!(m.abs() < 1e-5);
            assert!((v - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn constant_channel_maps_to_shift() {
        let x = Tensor::<f64>::full(&[2, 1, 3, 3], 4.2);
        let (g, b) = affine(1, 1.0, 3.0);
        let y = batch_norm(
            &x,
            &g,
            &b,
            BatchNormMode::Train {
                running: None,
                momentum: 0.99,
            },
            1e-5,
        )
        .unwrap();
        assert!(y.data().iter().all(|&v| (v - 3.0).abs() < 1e-12));
    }

    #[test]
    fn eval_without_stats_is_an_error() {
        let x = Tensor::<f32>::zeros(&[1, 2, 2, 2]);
        let (g, b) = (Tensor::full(&[2], 1.0f32), Tensor::zeros(&[2]));
        assert!(batch_norm(&x, &g, &b, BatchNormMode::Eval { running: None }, 1e-5).is_err());
    }

    #[test]
    fn running_stats_follow_momentum() {
        let x = Tensor::<f64>::new(&[1, 1, 1, 2], vec![1.0, 3.0]).unwrap();
        let (g, b) = affine(1, 1.0, 0.0);
        let mut slot = None;
        for _ in 0..2 {
            batch_norm(
                &x,
                &g,
                &b,
                BatchNormMode::Train {
                    running: Some(&mut slot),
                    momentum: 0.9,
                },
                1e-5,
            )
            .unwrap();
        }
        let rs = slot.unwrap();
        // first update copies (mean 2, unbiased var 2); second blends identical values
        assert!((rs.mean[0] - 2.0).abs() < 1e-12);
        assert!((rs.var[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn train_mode_rejects_single_value_per_channel() {
        let x = Tensor::<f64>::zeros(&[1, 2, 1, 1]);
        let (g, b) = affine(2, 1.0, 0.0);
        assert!(batch_norm(
            &x,
            &g,
            &b,
            BatchNormMode::Train {
                running: None,
                momentum: 0.9
            },
            1e-5
        )
        .is_err());
    }
}
