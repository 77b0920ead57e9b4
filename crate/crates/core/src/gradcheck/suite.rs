//! Ready-made gradient checks: every differentiable op and every model
//! variant at a reduced configuration.

use std::cell::RefCell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_gradients, check_gradients_with, weighted_sum, GradCheckOptions, GradCheckReport};
use crate::error::Result;
use crate::model::{
    convlstm_step, lateral_merge, ConvLstmState, ConvLstmWeights, MergeWeights, ModelConfig, Variant, Vln,
};
use crate::tensor::{
    batch_norm, bce_loss, concat, conv2d, BatchNormMode, Conv2dOptions, Element, Padding, RunningStats, Tensor,
};

/// Named result of one check.
#[derive(Debug, Clone)]
pub struct CaseReport {
    pub name: String,
    pub report: GradCheckReport,
}

type OpFn<T> = Box<dyn Fn(&[Tensor<T>]) -> Result<Tensor<T>>>;

struct Case<T: Element> {
    name: &'static str,
    inputs: Vec<Tensor<T>>,
    f: OpFn<T>,
}

fn uniform<T: Element>(rng: &mut ChaCha8Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor<T> {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| T::from_f64(rng.random_range(lo..hi))).collect()).expect("valid shape")
}

/// Values with magnitude in [0.1, 1] and random sign, away from the
/// leaky-ReLU kink.
fn off_zero<T: Element>(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<T> {
    let n = shape.iter().product();
    let v = (0..n)
        .map(|_| {
            let m = rng.random_range(0.1..1.0);
            T::from_f64(if rng.random_bool(0.5) { m } else { -m })
        })
        .collect();
    Tensor::new(shape, v).expect("valid shape")
}

/// Reduces an op output to a scalar with fixed random upstream weights.
fn reduce<T: Element>(out: Tensor<T>, seed: u64) -> Result<Tensor<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = uniform(&mut rng, out.shape(), -1.0, 1.0);
    weighted_sum(&out, &w)
}

fn case<T: Element>(
    name: &'static str,
    inputs: Vec<Tensor<T>>,
    f: impl Fn(&[Tensor<T>]) -> Result<Tensor<T>> + 'static,
) -> Case<T> {
    Case {
        name,
        inputs,
        f: Box::new(move |x| reduce(f(x)?, 99)),
    }
}

fn op_cases<T: Element>(seed: u64) -> Vec<Case<T>> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let s = [2, 3, 4, 5];
    let a: Tensor<T> = uniform(&mut r, &s, -1.0, 1.0);
    let b: Tensor<T> = uniform(&mut r, &s, -1.0, 1.0);
    let img: Tensor<T> = uniform(&mut r, &[2, 3, 7, 6], -1.0, 1.0);
    let k: Tensor<T> = uniform(&mut r, &[4, 3, 3, 3], -0.5, 0.5);
    let bias: Tensor<T> = uniform(&mut r, &[4], -0.5, 0.5);
    let running = RunningStats {
        mean: (0..3).map(|_| r.random_range(-0.5..0.5)).collect(),
        var: (0..3).map(|_| r.random_range(0.5..2.0)).collect(),
    };
    let gamma: Tensor<T> = uniform(&mut r, &[3], 0.5, 1.5);
    let beta: Tensor<T> = uniform(&mut r, &[3], -0.5, 0.5);
    // Binary targets with predictions on the matching side keep the BCE
    // curvature bounded for single-precision differences.
    let target_bits: Vec<bool> = (0..32).map(|_| r.random_bool(0.5)).collect();
    let p: Tensor<T> = Tensor::new(
        &[2, 1, 4, 4],
        target_bits
            .iter()
            .map(|&t| {
                let q = r.random_range(0.6..0.9);
                T::from_f64(if t { q } else { 1.0 - q })
            })
            .collect(),
    )
    .expect("valid shape");
    let target: Tensor<T> = Tensor::new(
        &[2, 1, 4, 4],
        target_bits
            .iter()
            .map(|&t| T::from_f64(if t { 1.0 } else { 0.0 }))
            .collect(),
    )
    .expect("valid shape");

    let conv = |name, opts: Conv2dOptions| {
        case(name, vec![img.clone(), k.clone(), bias.clone()], move |x| {
            conv2d(&x[0], &x[1], Some(&x[2]), opts)
        })
    };
    vec![
        case("add", vec![a.clone(), b.clone()], |x| x[0].add(&x[1])),
        case("sub", vec![a.clone(), b.clone()], |x| x[0].sub(&x[1])),
        case("mul", vec![a.clone(), b.clone()], |x| x[0].mul(&x[1])),
        case("scale", vec![a.clone()], |x| Ok(x[0].scale(T::from_f64(-1.7)))),
        case("sigmoid", vec![a.clone()], |x| Ok(x[0].sigmoid())),
        case("tanh", vec![a.clone()], |x| Ok(x[0].tanh())),
        case("leaky_relu", vec![off_zero(&mut r, &s)], |x| {
            Ok(x[0].leaky_relu(T::from_f64(0.01)))
        }),
        case("sum", vec![a.clone()], |x| Ok(x[0].sum().scale(T::from_f64(0.3)))),
        case("mean", vec![a.clone()], |x| Ok(x[0].mean())),
        case("narrow", vec![a.clone()], |x| x[0].narrow(2, 1, 2)),
        case("slice_channels", vec![a.clone()], |x| x[0].slice_channels(1, 2)),
        case("reshape", vec![a.clone()], |x| x[0].reshape(&[6, 20])),
        case("concat_axis0", vec![a.clone(), b.clone()], |x| {
            concat(&[&x[0], &x[1]], 0)
        }),
        case(
            "concat_axis1",
            vec![a.clone(), img.narrow(2, 0, 4).unwrap().narrow(3, 0, 5).unwrap()],
            |x| concat(&[&x[0], &x[1]], 1),
        ),
        case("upsample_nearest", vec![a.clone()], |x| x[0].upsample_nearest(2)),
        conv("conv2d_same", Conv2dOptions::default()),
        conv("conv2d_stride2", Conv2dOptions::default().stride(2)),
        conv("conv2d_dilation2", Conv2dOptions::default().dilation(2)),
        conv(
            "conv2d_explicit_padding",
            Conv2dOptions::default().padding(Padding::Explicit(0, 2)),
        ),
        case(
            "batch_norm_train",
            vec![img.clone(), gamma.clone(), beta.clone()],
            |x| {
                batch_norm(
                    &x[0],
                    &x[1],
                    &x[2],
                    BatchNormMode::Train {
                        running: None,
                        momentum: 0.99,
                    },
                    1e-5,
                )
            },
        ),
        case("batch_norm_eval", vec![img.clone(), gamma, beta], move |x| {
            batch_norm(
                &x[0],
                &x[1],
                &x[2],
                BatchNormMode::Eval {
                    running: Some(&running),
                },
                1e-5,
            )
        }),
        case("bce_loss", vec![p], move |x| bce_loss(&x[0], &target)),
    ]
}

fn composite_cases<T: Element>(seed: u64) -> Vec<Case<T>> {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let (n, cz, ch, hw) = (2, 2, 3, 5);
    let mut inputs: Vec<Tensor<T>> = Vec::new();
    for _ in 0..4 {
        inputs.push(uniform(&mut r, &[ch, cz, 3, 3], -0.5, 0.5));
    }
    for _ in 0..4 {
        inputs.push(uniform(&mut r, &[ch, ch, 3, 3], -0.5, 0.5));
    }
    for _ in 0..4 {
        inputs.push(uniform(&mut r, &[ch], -0.5, 0.5));
    }
    inputs.push(uniform(&mut r, &[n, cz, hw, hw], -1.0, 1.0));
    inputs.push(uniform(&mut r, &[n, ch, hw, hw], -1.0, 1.0));
    inputs.push(uniform(&mut r, &[n, ch, hw, hw], -1.0, 1.0));
    let weights = |x: &[Tensor<T>]| ConvLstmWeights {
        w_z: [x[0].clone(), x[1].clone(), x[2].clone(), x[3].clone()],
        w_h: [x[4].clone(), x[5].clone(), x[6].clone(), x[7].clone()],
        b: [x[8].clone(), x[9].clone(), x[10].clone(), x[11].clone()],
    };
    let lstm = case("convlstm_step", inputs.clone(), move |x| {
        let state = ConvLstmState {
            hidden: x[13].clone(),
            cell: x[14].clone(),
        };
        let next = convlstm_step(&weights(x), &x[12], Some(&state))?;
        concat(&[&next.hidden, &next.cell], 1)
    });
    let lstm_zero = case("convlstm_step_zero_state", inputs[..13].to_vec(), move |x| {
        let next = convlstm_step(&weights(x), &x[12], None)?;
        concat(&[&next.hidden, &next.cell], 1)
    });

    // above: 2 channels, h: 3, z: 2, out: 4.
    let merge_inputs = vec![
        off_zero(&mut r, &[n, 2, hw, hw]),
        off_zero(&mut r, &[n, 3, hw, hw]),
        off_zero(&mut r, &[n, 2, hw, hw]),
        uniform(&mut r, &[4, 5, 1, 1], -0.5, 0.5),
        uniform(&mut r, &[4], -0.5, 0.5),
        uniform(&mut r, &[4, 6, 1, 1], -0.5, 0.5),
        uniform(&mut r, &[4], -0.5, 0.5),
    ];
    let merge = case("lateral_merge", merge_inputs, |x| {
        let w = MergeWeights {
            w_h: Some((x[3].clone(), x[4].clone())),
            w_z: (x[5].clone(), x[6].clone()),
        };
        // A slope of 0.5 keeps both kink sides well conditioned.
        lateral_merge(&w, Some(&x[0]), Some(&x[1]), Some(&x[2]), T::from_f64(0.5))
    });
    vec![lstm, lstm_zero, merge]
}

fn all_cases<T: Element>() -> Vec<Case<T>> {
    op_cases::<T>(11).into_iter().chain(composite_cases::<T>(12)).collect()
}

/// Checks every differentiable op plus the conv-LSTM step and the lateral
/// merge in double precision.
pub fn op_suite_f64(opts: GradCheckOptions) -> Result<Vec<CaseReport>> {
    all_cases::<f64>()
        .into_iter()
        .map(|c| {
            Ok(CaseReport {
                name: c.name.to_string(),
                report: check_gradients(&c.inputs, &c.f, opts)?,
            })
        })
        .collect()
}

/// Single-precision backward passes of the same cases against
/// double-precision central differences.
pub fn op_suite_f32(opts: GradCheckOptions) -> Result<Vec<CaseReport>> {
    all_cases::<f32>()
        .into_iter()
        .zip(all_cases::<f64>())
        .map(|(c32, c64)| {
            Ok(CaseReport {
                name: c32.name.to_string(),
                report: check_gradients_with(&c32.inputs, &c32.f, &c64.f, opts)?,
            })
        })
        .collect()
}

/// Loss of a short unroll of `model`: two context frames, a prediction of
/// the third, then one fed-back prediction of the fourth. The fed-back
/// prediction stays attached so that the loss is one differentiable
/// function of the parameters.
pub fn unroll_loss<T: Element>(model: &Vln<T>, frames: &[Tensor<T>]) -> Result<Tensor<T>> {
    let mut state = model.zero_state();
    state = model.advance(&frames[0], &state)?;
    let (p1, state) = model.step(&frames[1], &state)?;
    let (p2, _) = model.step(&p1, &state)?;
    bce_loss(&p1, &frames[2])?
        .mean()
        .add(&bce_loss(&p2, &frames[3])?.mean())
}

/// Parameters, frames and a loss closure for one model in precision `T`.
fn model_problem<T: Element>(config: &ModelConfig) -> Result<(Vec<Tensor<T>>, OpFn<T>)> {
    let model = Vln::new(config.clone(), 5)?.cast::<T>();
    let mut r = ChaCha8Rng::seed_from_u64(6);
    let frames: Vec<Tensor<T>> = (0..4)
        .map(|_| {
            let f: Tensor<f32> = uniform(&mut r, &[2, 1, config.frame_size, config.frame_size], 0.0, 1.0);
            f.cast::<T>().detach()
        })
        .collect();
    let inputs: Vec<Tensor<T>> = model.parameters().iter().map(|p| p.value.detach()).collect();
    let cell = RefCell::new(model);
    let f = move |x: &[Tensor<T>]| {
        let mut m = cell.borrow_mut();
        for (i, t) in x.iter().enumerate() {
            m.store_mut().replace(i, t.clone())?;
        }
        unroll_loss(&m, &frames)
    };
    Ok((inputs, Box::new(f)))
}

/// Gradient check of all parameters of a model in double precision, with
/// batch norm using batch statistics.
pub fn model_check_f64(config: &ModelConfig, opts: GradCheckOptions) -> Result<GradCheckReport> {
    let (inputs, f) = model_problem::<f64>(config)?;
    check_gradients(&inputs, f, opts)
}

/// Single-precision backward pass of a model against double-precision
/// central differences.
pub fn model_check_f32(config: &ModelConfig, opts: GradCheckOptions) -> Result<GradCheckReport> {
    let (inputs, f) = model_problem::<f32>(config)?;
    let (_, reference) = model_problem::<f64>(config)?;
    check_gradients_with(&inputs, f, reference, opts)
}

/// Whole-model settings: a few coordinates per parameter tensor, skipping
/// coordinates whose step moves some activation across a leaky-ReLU kink.
pub fn model_options(single: bool) -> GradCheckOptions {
    let base = if single {
        GradCheckOptions::single()
    } else {
        GradCheckOptions::double()
    };
    GradCheckOptions {
        samples_per_input: Some(3),
        nonsmooth_tolerance: Some(1e-6),
        ..base
    }
}

/// The reduced configuration with identity activations. The loss is then
/// smooth, so no coordinate is skipped and every parameter tensor is
/// covered; the native-slope checks cover the kinked branch.
pub fn linearized(variant: Variant) -> ModelConfig {
    ModelConfig {
        leaky_slope: 1.0,
        ..ModelConfig::reduced(variant)
    }
}

/// Both precisions for all four variants, at the reduced configuration and
/// its linearized form.
pub fn model_suite() -> Result<Vec<CaseReport>> {
    let mut out = Vec::new();
    for v in Variant::ALL {
        for (tag, c) in [("", ModelConfig::reduced(v)), ("/linear", linearized(v))] {
            out.push(CaseReport {
                name: format!("{}/f64{tag}", v.name()),
                report: model_check_f64(&c, model_options(false))?,
            });
            out.push(CaseReport {
                name: format!("{}/f32{tag}", v.name()),
                report: model_check_f32(&c, model_options(true))?,
            });
        }
    }
    Ok(out)
}
