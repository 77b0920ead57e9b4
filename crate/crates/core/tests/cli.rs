mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use common::synthetic_sprites;
use vln::data::idx::encode_mnist;
use vln::data::stream::{TEST_IMAGES, TEST_LABELS, TRAIN_IMAGES, TRAIN_LABELS};

fn vln(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vln"))
        .args(args)
        .current_dir(cwd)
        .env_remove("VLN_DATA_DIR")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Synthetic IDX files in `<dir>/mnist`.
fn fixture(dir: &Path) -> PathBuf {
    let d = dir.join("mnist");
    fs::create_dir_all(&d).unwrap();
    let (img, lab) = encode_mnist(&synthetic_sprites(20, 1));
    fs::write(d.join(TRAIN_IMAGES), img).unwrap();
    fs::write(d.join(TRAIN_LABELS), lab).unwrap();
    let (img, lab) = encode_mnist(&synthetic_sprites(5, 2));
    fs::write(d.join(TEST_IMAGES), img).unwrap();
    fs::write(d.join(TEST_LABELS), lab).unwrap();
    d
}

#[test]
fn help_lists_subcommands_and_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let top = stdout(&vln(&["--help"], tmp.path()));
    for sub in ["fetch-data", "generate", "train", "eval", "predict", "describe"] {
        assert!(top.contains(sub), "{sub} missing from\n{top}");
    }
    let train = stdout(&vln(&["train", "--help"], tmp.path()));
    for needle in [
        "[default: 5]",
        "[default: 10000]",
        "[default: 16]",
        "[default: vln]",
        "--resume",
        "--set",
    ] {
        assert!(train.contains(needle), "{needle} missing from\n{train}");
    }
}

#[test]
fn usage_and_config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&vln(&["train"], tmp.path())), 2);
    assert_eq!(code(&vln(&["train", "--variant", "nope", "--out", "r"], tmp.path())), 2);
    assert_eq!(code(&vln(&["describe", "--set", "train.bogus=1"], tmp.path())), 2);
    assert_eq!(
        code(&vln(
            &["predict", "--select", "test:3..1", "--checkpoint", "x", "--out", "p"],
            tmp.path()
        )),
        2
    );
}

#[test]
fn missing_or_corrupt_data_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let o = vln(
        &["eval", "--baseline", "copy-last", "--data", "nowhere", "--out", "e"],
        tmp.path(),
    );
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    // Synthetic files do not match the MNIST checksums.
    let src = fixture(tmp.path());
    let o = vln(
        &["fetch-data", "--source", src.to_str().unwrap(), "--dest", "d"],
        tmp.path(),
    );
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("train-images-idx3-ubyte"));
    assert_eq!(code(&vln(&["fetch-data", "--dest", "empty"], tmp.path())), 3);
}

#[test]
fn describe_prints_parameters_and_total() {
    let tmp = tempfile::tempdir().unwrap();
    let o = vln(&["describe", "--variant", "vln-resnet", "--out", "d"], tmp.path());
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.contains("encoder.level1.a.conv.kernel"));
    let total: f64 = text
        .lines()
        .last()
        .unwrap()
        .rsplit(' ')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!((total / 1.3e6 - 1.0).abs() <= 0.15);
    assert!(tmp.path().join("d/manifest.toml").exists());
}

#[test]
fn baselines_eval_without_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let data = fixture(tmp.path());
    let o = vln(
        &[
            "eval",
            "--baseline",
            "constant",
            "--test-size",
            "6",
            "--data",
            data.to_str().unwrap(),
            "--out",
            "e",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("e/metrics.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 11);
    assert!(rows[10].starts_with("0,test,mean,2839.1"));
    let manifest = fs::read_to_string(tmp.path().join("e/manifest.toml")).unwrap();
    assert!(manifest.contains("command = \"eval\"") && manifest.contains("test_size = 6"));
    // Refuses to overwrite without --force.
    let again = [
        "eval",
        "--baseline",
        "copy-last",
        "--data",
        data.to_str().unwrap(),
        "--out",
        "e",
    ];
    assert_eq!(code(&vln(&again, tmp.path())), 2);
}

#[test]
fn generate_writes_dump_and_pngs() {
    let tmp = tempfile::tempdir().unwrap();
    let data = fixture(tmp.path());
    let o = vln(
        &[
            "generate",
            "--split",
            "val",
            "--count",
            "3",
            "--png",
            "--data",
            data.to_str().unwrap(),
            "--out",
            "g",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dump = fs::read(tmp.path().join("g/val-epoch0.bin")).unwrap();
    assert_eq!(dump.len(), 16 + 3 * 20 * 64 * 64);
    let img = image::open(tmp.path().join("g/val-0002.png")).unwrap();
    assert_eq!((img.width(), img.height()), (1322, 134));
}

#[test]
fn train_resume_eval_and_predict() {
    let tmp = tempfile::tempdir().unwrap();
    let data = fixture(tmp.path());
    let d = data.to_str().unwrap();
    let base = [
        "train",
        "--variant",
        "vln-bl",
        "--train-size",
        "2",
        "--batch-size",
        "2",
        "--val-size",
        "2",
        "--horizon",
        "1",
        "--data",
        d,
        "--out",
        "run",
    ];
    let o = vln(&[&base[..], &["--epochs", "1"]].concat(), tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = vln(&[&base[..], &["--epochs", "2", "--resume"]].concat(), tmp.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("resuming"));
    let run = tmp.path().join("run");
    assert!(run.join("checkpoints/run-epoch0002.ckpt").exists());
    let manifest = fs::read_to_string(run.join("manifest.toml")).unwrap();
    assert!(manifest.contains("learning_rate = 0.0001") && manifest.contains("config_hash"));

    let o = vln(
        &["eval", "--run", "run", "--test-size", "2", "--data", d, "--out", "ev"],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        fs::read_to_string(tmp.path().join("ev/metrics.csv"))
            .unwrap()
            .lines()
            .count(),
        12
    );

    let o = vln(
        &[
            "predict",
            "--run",
            "run",
            "--select",
            "test:0..3",
            "--data",
            d,
            "--out",
            "pr",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let pngs: Vec<_> = fs::read_dir(tmp.path().join("pr"))
        .unwrap()
        .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
        .filter(|n| n.ends_with(".png"))
        .collect();
    assert_eq!(pngs.len(), 4, "{pngs:?}");
    let img = image::open(tmp.path().join("pr/test-0003.png")).unwrap();
    assert_eq!((img.width(), img.height()), (1322, 134));
    assert!(tmp.path().join("pr/manifest.toml").exists());
}

#[test]
fn divergence_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let data = fixture(tmp.path());
    let o = vln(
        &[
            "train",
            "--variant",
            "vln-bl",
            "--train-size",
            "4",
            "--batch-size",
            "2",
            "--val-size",
            "0",
            "--epochs",
            "3",
            "--lr",
            "1e30",
            "--data",
            data.to_str().unwrap(),
            "--out",
            "run",
        ],
        tmp.path(),
    );
    assert_eq!(code(&o), 4, "{}\n{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
}
