//! One PASS/FAIL line per acceptance criterion.
//!
//! Run: `cargo test --release --test acceptance`

mod common;

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use common::invariants::{check_stream, split_summary};
use common::oracle::convlstm_case;
use common::runs::{artifacts, differing};
use common::structure::{frozen_bn_agreement, shape_ladder, LADDER};
use common::{real_data, synthetic_data};
use vln::data::{MovingMnist, StreamKind};
use vln::gradcheck::suite::{model_suite, op_suite_f32, op_suite_f64, CaseReport};
use vln::gradcheck::GradCheckOptions;
use vln::model::{ModelConfig, Variant, Vln};
use vln::tensor::bce_loss;
use vln::train::eval::{evaluate_stream, evaluate_testset, Constant, CopyLast};
use vln::train::run::load_model;
use vln::train::{train_run, RunConfig, RunOptions, TrainConfig};
use vln::Tensor;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

const TARGET_COUNTS: [(Variant, f64); 4] = [
    (Variant::Vln, 1.2e6),
    (Variant::VlnResnet, 1.3e6),
    (Variant::VlnBl, 1.2e6),
    (Variant::VlnBlFf, 1.2e6),
];

const README_TARGETS: [&str; 4] = ["207.0", "187.7", "222.3", "220.1"];

fn within(elapsed: Duration, limit_s: u64) -> Result<(), String> {
    if elapsed.as_secs() > limit_s {
        return Err(format!("took {:.0}s, limit {limit_s}s", elapsed.as_secs_f64()));
    }
    Ok(())
}

fn mnist() -> Result<MovingMnist, String> {
    real_data(0).ok_or_else(|| format!("MNIST not installed at {}", common::data_dir().display()))
}

fn gradients() -> Outcome {
    let timer = Instant::now();
    let e = |e: vln::Error| e.to_string();
    let check = |cases: Vec<CaseReport>, tol: f64| -> Result<f64, String> {
        let mut worst = 0.0f64;
        for c in &cases {
            if c.report.checked < 20 {
                return Err(format!("{}: {} samples", c.name, c.report.checked));
            }
            if c.report.max_rel_error >= tol {
                return Err(format!("{}: rel error {:.2e}", c.name, c.report.max_rel_error));
            }
            worst = worst.max(c.report.max_rel_error);
        }
        Ok(worst)
    };
    let f64_ops = check(op_suite_f64(GradCheckOptions::double()).map_err(e)?, 1e-5)?;
    let f32_ops = check(op_suite_f32(GradCheckOptions::single()).map_err(e)?, 1e-3)?;
    let models = model_suite().map_err(e)?;
    let (d, s): (Vec<_>, Vec<_>) = models.into_iter().partition(|c| c.name.contains("f64"));
    let f64_models = check(d, 1e-5)?;
    let f32_models = check(s, 1e-3)?;
    within(timer.elapsed(), 300)?;
    Ok(format!(
        "max rel error ops {f64_ops:.1e}/{f32_ops:.1e}, models {f64_models:.1e}/{f32_models:.1e} (f64/f32)"
    ))
}

fn convlstm_oracle() -> Outcome {
    let timer = Instant::now();
    let worst = (0..50).map(convlstm_case).fold(0.0, f64::max);
    within(timer.elapsed(), 60)?;
    if worst >= 1e-5 {
        return Err(format!("max abs diff {worst:.2e}"));
    }
    Ok(format!("50 cases, max abs diff {worst:.1e}"))
}

fn parameter_counts() -> Outcome {
    let mut parts = Vec::new();
    for (v, target) in TARGET_COUNTS {
        let m = Vln::new(ModelConfig::preset(v), 0).map_err(|e| e.to_string())?;
        let last = m.describe().lines().last().unwrap_or_default().to_string();
        let total: usize = last
            .strip_prefix("total parameters ")
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| format!("{}: describe ends with {last:?}", v.name()))?;
        let dev = total as f64 / target - 1.0;
        parts.push(format!("{} {total} ({:+.1}%)", v.name(), 100.0 * dev));
        if dev.abs() > 0.15 {
            return Err(parts.join(", "));
        }
    }
    Ok(parts.join(", "))
}

fn shapes() -> Outcome {
    for v in Variant::ALL {
        let sizes = shape_ladder(v)?;
        if sizes != LADDER {
            return Err(format!("{}: {sizes:?}", v.name()));
        }
    }
    Ok("64→32→16→8 for all four variants".into())
}

fn dataset() -> Outcome {
    let timer = Instant::now();
    let data = mnist()?;
    for (kind, count) in [
        (StreamKind::Train, 400),
        (StreamKind::Validation, 300),
        (StreamKind::Test, 300),
    ] {
        check_stream(&data, kind, 0, count)?;
    }
    let (train, val, pct) = split_summary(&data);
    if (train, val) != (48_000, 12_000) {
        return Err(format!("split {train}/{val}"));
    }
    if let Some(p) = pct.iter().find(|p| (**p - 20.0).abs() > 1.0) {
        return Err(format!("class share {p:.2}%"));
    }
    within(timer.elapsed(), 120)?;
    let (lo, hi) = pct
        .iter()
        .fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(*p), b.max(*p)));
    Ok(format!(
        "1000 sequences, split {train}/{val}, class shares {lo:.2}–{hi:.2}%"
    ))
}

fn loss_anchors() -> Outcome {
    let data = mnist()?;
    let constant =
        evaluate_stream(&Constant(0.5), &data, StreamKind::Test, 0, 100, 25, |_| {}).map_err(|e| e.to_string())?;
    if (constant.mean - 2839.0).abs() > 0.5 {
        return Err(format!("constant 0.5 scores {:.3}", constant.mean));
    }
    // A perfect prediction of a binary frame.
    let seq = data.sequence(StreamKind::Test, 0, 0).map_err(|e| e.to_string())?;
    let frame: Vec<f32> = seq.frames[..4096]
        .iter()
        .map(|&v| if v >= 0.5 { 1.0 } else { 0.0 })
        .collect();
    let t = Tensor::new(&[1, 1, 64, 64], frame).map_err(|e| e.to_string())?;
    let perfect = bce_loss(&t, &t).and_then(|l| l.item()).map_err(|e| e.to_string())?;
    if perfect >= 0.01 {
        return Err(format!("perfect prediction scores {perfect:e}"));
    }
    Ok(format!("constant 0.5: {:.3}, perfect: {perfect:.1e}", constant.mean))
}

fn overfit_config() -> RunConfig {
    RunConfig::new(
        ModelConfig::preset(Variant::VlnBl),
        TrainConfig {
            epochs: 200,
            train_size: 8,
            batch_size: 8,
            val_size: 0,
            fixed_train_set: true,
            checkpoint_every: 1000,
            ..TrainConfig::default()
        },
    )
}

fn learning_config() -> RunConfig {
    RunConfig::new(
        ModelConfig::preset(Variant::Vln),
        TrainConfig {
            epochs: 2,
            train_size: 500,
            val_size: 0,
            ..TrainConfig::default()
        },
    )
}

fn train(data: &MovingMnist, cfg: &RunConfig, dir: &Path) -> Result<vln::train::run::RunOutcome, String> {
    train_run(
        data,
        cfg,
        dir,
        RunOptions {
            resume: false,
            force: true,
        },
        &mut |_| {},
    )
    .map_err(|e| e.to_string())
}

fn desk_scale(scratch: &Path) -> Outcome {
    let timer = Instant::now();
    let data = mnist()?;
    let out = train(&data, &overfit_config(), &scratch.join("overfit-a"))?;
    let (first, last) = (out.metrics[0].mean, out.metrics[out.metrics.len() - 1].mean);
    let drop = 1.0 - last / first;

    let cfg = learning_config();
    let out = train(&data, &cfg, &scratch.join("learn"))?;
    let path = out.last_checkpoint.ok_or("no checkpoint")?;
    let mut model = load_model(&cfg.model, &path).map_err(|e| e.to_string())?;
    let test = evaluate_testset(&mut model, &data, 200, 25).map_err(|e| e.to_string())?;
    let copy = evaluate_stream(&CopyLast, &data, StreamKind::Test, 0, 200, 25, |_| {}).map_err(|e| e.to_string())?;

    let detail = format!(
        "vln-bl overfit {first:.1} → {last:.1} ({:.1}% drop); vln test {:.1} vs copy-last {:.1}; {:.0}s",
        100.0 * drop,
        test.mean,
        copy.mean,
        timer.elapsed().as_secs_f64()
    );
    if drop < 0.8 || test.mean >= copy.mean {
        return Err(detail);
    }
    within(timer.elapsed(), 45 * 60).map_err(|e| format!("{detail}; {e}"))?;
    Ok(detail)
}

fn windowing() -> Outcome {
    let data = synthetic_data(7);
    let batch: Vec<_> = data
        .epoch_stream(StreamKind::Test, 0, 2)
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let mut worst = 0.0f32;
    for v in Variant::ALL {
        let mut m = Vln::new(ModelConfig::preset(v), 0).map_err(|e| e.to_string())?;
        worst = worst.max(frozen_bn_agreement(&mut m, &batch));
    }
    if worst >= 1e-5 {
        return Err(format!("max abs diff {worst:e}"));
    }
    Ok(format!("max abs diff {worst:.1e} over four variants"))
}

fn determinism(scratch: &Path) -> Outcome {
    let data = mnist()?;
    let a = scratch.join("overfit-a");
    if !a.join("metrics.csv").exists() {
        train(&data, &overfit_config(), &a)?;
    }
    let b = scratch.join("overfit-b");
    train(&data, &overfit_config(), &b)?;
    let (x, y) = (artifacts(&a), artifacts(&b));
    let diff = differing(&x, &y);
    if !diff.is_empty() {
        return Err(format!("differing: {diff:?}"));
    }
    Ok(format!("{} files bitwise identical", x.len()))
}

fn readme() -> Outcome {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../README.md");
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let missing: Vec<&str> = README_TARGETS.iter().copied().filter(|t| !text.contains(t)).collect();
    if !missing.is_empty() {
        return Err(format!("targets missing: {missing:?}"));
    }
    for v in Variant::ALL {
        if !text.contains(&format!("vln train --variant {}", v.name())) {
            return Err(format!("no command for {}", v.name()));
        }
    }
    if !text.contains("beyond desk scale") {
        return Err("targets not marked as beyond desk scale".into());
    }
    Ok("four targets with commands".into())
}

fn main() {
    let scratch = tempfile::tempdir().expect("tempdir");
    let s = scratch.path();
    let criteria: Vec<Criterion<'_>> = vec![
        ("gradient suite", Box::new(gradients)),
        ("conv-LSTM oracle", Box::new(convlstm_oracle)),
        ("parameter counts", Box::new(parameter_counts)),
        ("shape ladder", Box::new(shapes)),
        ("dataset invariants", Box::new(dataset)),
        ("loss anchors", Box::new(loss_anchors)),
        ("desk-scale learning", Box::new(move || desk_scale(s))),
        ("windowing consistency", Box::new(windowing)),
        ("determinism", Box::new(move || determinism(s))),
        ("reproduction targets", Box::new(readme)),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let timer = Instant::now();
        let (tag, detail) = match f() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "{tag} {:>2} {name:22} {detail} [{:.1}s]",
            i + 1,
            timer.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
