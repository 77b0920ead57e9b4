//! Model-structure checks shared by the model tests and the acceptance run.

use vln::data::VideoSequence;
use vln::model::{BnMode, ModelConfig, Variant, Vln};
use vln::train::eval::evaluate_batch;
use vln::train::rollout::rollout;

pub const LADDER: [usize; 4] = [64, 32, 16, 8];

/// Builds the full-size model and checks every traced tensor of one step
/// against the 64→32→16→8 ladder. Returns the observed spatial sizes.
pub fn shape_ladder(variant: Variant) -> Result<Vec<usize>, String> {
    let config = ModelConfig::preset(variant);
    let model = Vln::new(config.clone(), 0).map_err(|e| e.to_string())?;
    let batch = 2;
    let trace = model.trace_shapes(batch).map_err(|e| e.to_string())?;
    let get = |k: &str| trace.get(k).ok_or_else(|| format!("{variant:?}: no traced tensor {k}"));
    let expect = |k: &str, want: [usize; 4]| -> Result<(), String> {
        let got = get(k)?;
        if got != want {
            return Err(format!("{variant:?}: {k} is {got:?}, expected {want:?}"));
        }
        Ok(())
    };
    expect("input", [batch, 1, 64, 64])?;
    let mut sizes = vec![64];
    for l in 0..config.levels() {
        let (n, c, s) = (l + 1, config.level_channels(l), LADDER[l + 1]);
        expect(&format!("z{n}"), [batch, c, s, s])?;
        if config.recurrent(l) {
            expect(&format!("lateral{n}.h"), [batch, config.lstm_channels[l], s, s])?;
            expect(&format!("lateral{n}.c"), [batch, config.lstm_channels[l], s, s])?;
        }
        if let Ok(m) = get(&format!("lateral{n}.merged")) {
            if m != [batch, c, s, s] {
                return Err(format!("{variant:?}: lateral{n}.merged is {m:?}"));
            }
        }
        expect(&format!("decoder.level{n}.upsampled"), [batch, c, 2 * s, 2 * s])?;
        sizes.push(get(&format!("z{n}"))?[2]);
    }
    expect("prediction", [batch, 1, 64, 64])?;
    Ok(sizes)
}

fn copy_into(dst: &mut Vln, name: &str, values: Vec<f32>) {
    dst.store_mut().set_by_name(name, values).unwrap();
}

/// Identity 1×1 kernel `[n, cols, 1, 1]` on the first `n` input channels.
fn identity_columns(n: usize, cols: usize) -> Vec<f32> {
    let mut k = vec![0.0; n * cols];
    for i in 0..n {
        k[i * cols + i] = 1.0;
    }
    k
}

/// BL and a BL-FF whose extra weights are set so that it computes the same
/// function: shared weights copied by name, identity merges where BL passes
/// the decoder signal through, and zero feedforward columns in merges both
/// models have. Identity activations make the pass-through exact.
pub fn surgery_pair(base: ModelConfig, apply: bool) -> (Vln, Vln) {
    let bl_cfg = ModelConfig {
        leaky_slope: 1.0,
        ..ModelConfig {
            variant: Variant::VlnBl,
            feedforward: vec![false; base.levels()],
            ..base.clone()
        }
    };
    let ff_cfg = ModelConfig {
        variant: Variant::VlnBlFf,
        feedforward: vec![true; base.levels()],
        ..bl_cfg.clone()
    };
    let bl = Vln::new(bl_cfg, 1).unwrap();
    let mut ff = Vln::new(ff_cfg, 2).unwrap();
    if !apply {
        return (bl, ff);
    }
    let bl_params: Vec<(String, Vec<usize>, Vec<f32>)> = bl
        .parameters()
        .iter()
        .map(|p| (p.name.clone(), p.value.shape().to_vec(), p.value.to_vec()))
        .collect();
    let ff_params: Vec<(String, Vec<usize>)> = ff
        .parameters()
        .iter()
        .map(|p| (p.name.clone(), p.value.shape().to_vec()))
        .collect();
    for (name, shape) in ff_params {
        let numel: usize = shape.iter().product();
        match bl_params.iter().find(|(n, _, _)| *n == name) {
            Some((_, s, v)) if *s == shape => copy_into(&mut ff, &name, v.clone()),
            Some((_, s, v)) => {
                // Merge W_z with extra feedforward input columns.
                let (rows, bl_cols, cols) = (s[0], s[1], shape[1]);
                let mut k = vec![0.0; numel];
                for r in 0..rows {
                    k[r * cols..r * cols + bl_cols].copy_from_slice(&v[r * bl_cols..(r + 1) * bl_cols]);
                }
                copy_into(&mut ff, &name, k);
            }
            None if name.ends_with(".kernel") => copy_into(&mut ff, &name, identity_columns(shape[0], shape[1])),
            None => copy_into(&mut ff, &name, vec![0.0; numel]),
        }
    }
    (bl, ff)
}

/// Max abs difference between the predictions of BL and BL-FF over a run of
/// `frames`; `apply = false` leaves BL-FF at its own initialization.
pub fn surgery_difference(base: ModelConfig, frames: &[vln::Tensor], apply: bool) -> f32 {
    let (bl, ff) = surgery_pair(base, apply);
    let (mut sa, mut sb) = (bl.zero_state(), ff.zero_state());
    let mut worst = 0.0f32;
    for f in frames {
        let (pa, na) = bl.step(f, &sa).unwrap();
        let (pb, nb) = ff.step(f, &sb).unwrap();
        worst = pa
            .data()
            .iter()
            .zip(pb.data())
            .map(|(a, b)| (a - b).abs())
            .fold(worst, f32::max);
        (sa, sb) = (na, nb);
    }
    worst
}

/// With batch norm frozen, the training unroll and the evaluation
/// predictor must agree on the first predicted frame. Returns the max abs
/// difference.
pub fn frozen_bn_agreement(model: &mut Vln, batch: &[VideoSequence]) -> f32 {
    // Populate running statistics with a few training-mode passes.
    model.set_bn_mode(BnMode::Train);
    for _ in 0..2 {
        rollout(model, batch, 1).unwrap();
    }
    model.set_bn_mode(BnMode::Eval);
    let train_path = rollout(model, batch, 1).unwrap().predictions.remove(0);
    let eval_path = evaluate_batch(&*model, batch).unwrap().predictions.remove(0);
    train_path
        .data()
        .iter()
        .zip(eval_path.data())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f32::max)
}
