use std::path::Path;
use std::process::Command;

use sharpnet::checkpoint::{self, Checkpoint};
use sharpnet::config::RunConfig;
use sharpnet::dataset::{load_dataset, save_dataset, Dataset};
use sharpnet::files::{load_palette, save_palette};
use sharpnet::train::EpochLog;
use sharpnet_core::data::{gen_synthetic, ColorMode, Palette};
use sharpnet_core::haar::HaarKernel;
use sharpnet_core::model::{SharpNet, SharpNetConfig};
use sharpnet_core::optim::AdamHyper;
use sharpnet_core::Tensor;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sharpnet"))
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

/// Inception block: two separable branches, two 1×1 branches.
fn inception(c: usize, out: usize) -> usize {
    let b = out / 4;
    (9 * c + c * b + b) + (25 * c + c * b + b) + 2 * (c * b + b)
}

#[test]
fn tiny_parameter_count_by_hand() {
    let p = 128;
    let expected = inception(3, 8)
        + inception(8, 16)
        + (9 * 5 + 5 * 16 + 16)
        + (16 * 16 + 16)
        + (8 * p + p)
        + (16 * p + p)
        + 2 * (9 * p + p * p + p)
        + (p * 3 + 3);
    assert_eq!(expected, 40_006);
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.json");
    write(
        &cfg,
        &serde_json::json!({ "model": SharpNetConfig::tiny() }).to_string(),
    );
    let out = bin().args(["count-params", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), expected.to_string());
}

#[test]
fn unknown_config_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    write(&cfg, r#"{"train": {"epochs": 3, "momentum": 0.9}}"#);
    let out = bin().args(["count-params", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.lines().count(), 1);
    assert!(err.starts_with("E:config:"), "{err}");
}

#[test]
fn missing_dataset_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    write(
        &cfg,
        &serde_json::json!({ "data": { "root": dir.path().join("nowhere") } }).to_string(),
    );
    let out = bin().args(["select-features", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("E:data:"));
}

#[test]
fn help_lists_config_defaults() {
    for cmd in ["train", "evaluate", "count-params"] {
        let out = bin().args([cmd, "--help"]).output().unwrap();
        let text = String::from_utf8(out.stdout).unwrap();
        for key in [
            "model.levels = 4",
            "train.epochs = 100",
            "train.batch_size = 4",
            "haar.threshold_db = 18.0",
            "data.split.train = 0.7",
        ] {
            assert!(text.contains(key), "{cmd} help lacks {key}");
        }
    }
}

#[test]
fn config_defaults_and_overrides() {
    let c = RunConfig::from_json(r#"{"train": {"epochs": 3}}"#).unwrap();
    assert_eq!(c.train.epochs, 3);
    assert_eq!(c.train.lr, 1e-3);
    assert_eq!(c.model, SharpNetConfig::default());
    assert!(RunConfig::from_json(r#"{"haar": {"kernels": ["vedge:3x2"]}}"#).is_err());
    assert!(RunConfig::from_json(r#"{"model": {"levels": 3}}"#).is_err());
}

fn trained_tiny() -> Checkpoint {
    let mut net = SharpNet::new(SharpNetConfig::tiny()).unwrap();
    net.enable_adam(AdamHyper::default());
    let image = Tensor::from_fn(&[1, 16, 16, 3], |i| (i % 7) as f64 / 7.0);
    let bank = Tensor::from_fn(&[1, 4, 4, 5], |i| (i % 3) as f64 / 3.0);
    let targets = sharpnet_core::data::encode_one_hot(&sharpnet_core::data::ClassMap::filled(16, 16, 2), 3).unwrap();
    net.train_step(&image, Some(&bank), &targets).unwrap();
    net.train_step(&image, Some(&bank), &targets).unwrap();
    Checkpoint {
        net,
        haar_kernels: HaarKernel::default_bank(),
    }
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let ckpt = trained_tiny();
    let bytes = checkpoint::encode(&ckpt).unwrap();
    let loaded = checkpoint::decode(&bytes).unwrap();
    assert_eq!(loaded, ckpt);
    assert_eq!(checkpoint::encode(&loaded).unwrap(), bytes);
    let image = Tensor::from_fn(&[1, 16, 16, 3], |i| (i % 5) as f64 / 5.0);
    let bank = Tensor::from_fn(&[1, 4, 4, 5], |i| (i % 4) as f64 / 4.0);
    assert_eq!(
        loaded.net.forward(&image, Some(&bank)).unwrap(),
        ckpt.net.forward(&image, Some(&bank)).unwrap()
    );
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(checkpoint::decode(&bad).is_err());
    let mut version = bytes.clone();
    version[4] = 9;
    assert!(checkpoint::decode(&version).is_err());
    assert!(checkpoint::decode(&bytes[..bytes.len() - 3]).is_err());
}

#[test]
fn palette_and_dataset_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let palette = Palette::culvert_sewer();
    save_palette(&dir.path().join("p.csv"), &palette).unwrap();
    assert_eq!(load_palette(&dir.path().join("p.csv")).unwrap(), palette);
    let text = std::fs::read_to_string(dir.path().join("p.csv")).unwrap();
    assert!(text.starts_with("class_name,r,g,b,ciw\nBackground,"));

    let samples = gen_synthetic(3, 32, 32, 4, 5).unwrap();
    let data = Dataset {
        palette: Palette::synthetic(4).unwrap(),
        samples: samples.clone(),
    };
    let root = dir.path().join("ds");
    save_dataset(&root, &data).unwrap();
    let back = load_dataset(&root, ColorMode::Strict).unwrap();
    assert_eq!(back.samples, samples);
}

#[test]
fn unknown_mask_colour_names_the_pixel() {
    let dir = tempfile::tempdir().unwrap();
    let samples = gen_synthetic(1, 16, 16, 2, 1).unwrap();
    let root = dir.path();
    save_dataset(
        root,
        &Dataset {
            palette: Palette::synthetic(2).unwrap(),
            samples: samples.clone(),
        },
    )
    .unwrap();
    let mut rgb = sharpnet_core::data::encode_mask_rgb(&samples[0].mask, &Palette::synthetic(2).unwrap()).unwrap();
    let p = (3 * 16 + 5) * 3;
    rgb[p..p + 3].copy_from_slice(&[1, 2, 3]);
    sharpnet::files::write_png(&root.join("masks").join(format!("{}.png", samples[0].id)), 16, 16, rgb).unwrap();
    let err = load_dataset(root, ColorMode::Strict).unwrap_err().to_string();
    assert!(err.contains("(5, 3)") && err.contains("[1, 2, 3]"), "{err}");
    assert!(load_dataset(root, ColorMode::Lenient).is_ok());
}

fn losses(log: &str) -> Vec<(usize, f64, f64, f64, f64)> {
    log.lines()
        .map(|l| {
            let e: EpochLog = serde_json::from_str(l).unwrap();
            (e.epoch, e.train_loss, e.val_loss, e.val_iou, e.val_f1)
        })
        .collect()
}

#[test]
fn end_to_end_commands() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let status = bin()
        .args([
            "gen-synthetic",
            "--count",
            "6",
            "--width",
            "16",
            "--height",
            "16",
            "--classes",
            "3",
            "--seed",
            "4",
            "--out",
        ])
        .arg(&data)
        .status()
        .unwrap();
    assert!(status.success());
    let cfg = dir.path().join("run.json");
    let mut config = RunConfig {
        model: SharpNetConfig::tiny(),
        ..RunConfig::default()
    };
    config.model.pyramid_channels = 16;
    config.train.epochs = 2;
    config.train.batch_size = 2;
    config.data.root = data.clone();
    write(&cfg, &serde_json::to_string(&config).unwrap());

    let mut logs = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.path().join(run);
        let out = bin()
            .args(["train", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out_dir)
            .output()
            .unwrap();
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(out_dir.join("best.ckpt").exists() && out_dir.join("final.ckpt").exists());
        logs.push(losses(
            &std::fs::read_to_string(out_dir.join("train_log.jsonl")).unwrap(),
        ));
    }
    assert_eq!(logs[0].len(), 2);
    assert_eq!(logs[0], logs[1]);

    let ckpt = dir.path().join("a").join("final.ckpt");
    let out = bin()
        .args(["evaluate", "--subset", "all", "--config"])
        .arg(&cfg)
        .arg("--checkpoint")
        .arg(&ckpt)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    for key in [
        "iou_bg",
        "iou_nobg",
        "fwiou",
        "ciw_fwiou",
        "f1",
        "bal_acc",
        "mcc",
        "per_class",
    ] {
        assert!(report.get(key).is_some(), "missing {key}");
    }

    let image = std::fs::read_dir(data.join("images"))
        .unwrap()
        .next()
        .unwrap()
        .unwrap()
        .path();
    let pred_dir = dir.path().join("pred");
    let out = bin()
        .arg("predict")
        .arg("--checkpoint")
        .arg(&ckpt)
        .arg("--image")
        .arg(&image)
        .arg("--palette")
        .arg(data.join("palette.csv"))
        .arg("--out")
        .arg(&pred_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mask = sharpnet::files::read_png(Path::new(String::from_utf8(out.stdout).unwrap().trim())).unwrap();
    assert_eq!((mask.width, mask.height), (16, 16));

    let feat_dir = dir.path().join("features");
    let out = bin()
        .args(["extract-features", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&feat_dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    let t =
        sharpnet::files::read_tensor(&feat_dir.join(format!("{}.tnsr", image.file_stem().unwrap().to_str().unwrap())))
            .unwrap();
    assert_eq!(t.shape(), &[16, 16, 5]);

    let out = bin().args(["select-features", "--config"]).arg(&cfg).output().unwrap();
    assert!(out.status.success());
    let sel: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(!sel["kept"].as_array().unwrap().is_empty());
}
