//! One function per CLI command. Output that the command prints goes to
//! `out`; files go under the given output directory.

use std::io::Write;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use sharpnet_core::data::{
    encode_mask_rgb, encode_one_hot, gen_synthetic_with, ClassMap, ColorMode, Palette, Sample, SyntheticSpec,
};
use sharpnet_core::gradcheck::check_model_gradients;
use sharpnet_core::haar::{map_psnr, refine_with_mask, select_features, FeatureMap, HaarKernel};
use sharpnet_core::metrics::MetricReport;
use sharpnet_core::model::{SharpNet, SharpNetConfig};
use sharpnet_core::tnsr::DType;
use sharpnet_core::Tensor;

use crate::checkpoint::{self, Checkpoint};
use crate::config::RunConfig;
use crate::dataset::{load_dataset, save_dataset, Dataset};
use crate::error::{CliError, Result};
use crate::files::{read_png, write_png, write_tensor};
use crate::train::{evaluate, feature_bank, train, Prepared};

/// Relative error bound for `grad-check`.
pub const GRAD_TOLERANCE: f64 = 1e-4;

fn emit(out: &mut dyn Write, line: &str) -> Result<()> {
    writeln!(out, "{line}").map_err(|e| CliError::Data(format!("stdout: {e}")))
}

fn load(config: &RunConfig) -> Result<Dataset> {
    let mode = if config.data.lenient_colors {
        ColorMode::Lenient
    } else {
        ColorMode::Strict
    };
    load_dataset(&config.data.root, mode)
}

fn maps_for(sample: &Sample, kernels: &[HaarKernel], refine: bool) -> Result<Vec<FeatureMap>> {
    kernels
        .iter()
        .map(|k| {
            let map = k.apply(&sample.gray())?;
            Ok(if refine {
                refine_with_mask(&map, &sample.mask)?
            } else {
                map
            })
        })
        .collect()
}

/// Writes every image's full-resolution Haar responses as an H×W×B TNSR1
/// tensor `<out>/<id>.tnsr`, channels in kernel order.
pub fn extract_features(config: &RunConfig, out_dir: &Path, out: &mut dyn Write) -> Result<()> {
    let dataset = load(config)?;
    for s in &dataset.samples {
        let maps = maps_for(s, &config.haar.kernels, config.haar.refine_with_masks)?;
        let b = maps.len();
        let mut data = Vec::with_capacity(s.width * s.height * b);
        for p in 0..s.width * s.height {
            data.extend(maps.iter().map(|m| m.values()[p]));
        }
        let path = out_dir.join(format!("{}.tnsr", s.id));
        write_tensor(&path, &Tensor::new(vec![s.height, s.width, b], data)?, DType::F64)?;
        emit(out, &path.display().to_string())?;
    }
    Ok(())
}

/// Pools each kernel's maps over the whole dataset (stacked vertically) and
/// runs the greedy PSNR filter. Prints the pairwise PSNR table and the
/// surviving kernels as JSON.
pub fn select(config: &RunConfig, out: &mut dyn Write) -> Result<serde_json::Value> {
    let dataset = load(config)?;
    let kernels = &config.haar.kernels;
    let mut pooled: Vec<Vec<f64>> = vec![Vec::new(); kernels.len()];
    let (mut width, mut height) = (None, 0);
    for s in &dataset.samples {
        if *width.get_or_insert(s.width) != s.width {
            return Err(CliError::Data("feature selection needs images of one width".into()));
        }
        height += s.height;
        for (acc, map) in pooled
            .iter_mut()
            .zip(maps_for(s, kernels, config.haar.refine_with_masks)?)
        {
            acc.extend_from_slice(map.values());
        }
    }
    let width = width.ok_or_else(|| CliError::Data("empty dataset".into()))?;
    let maps = pooled
        .into_iter()
        .map(|v| FeatureMap::from_values(width, height, v))
        .collect::<sharpnet_core::Result<Vec<_>>>()?;
    let kept = select_features(&maps, config.haar.threshold_db)?;
    let mut table = Vec::new();
    for (i, a) in maps.iter().enumerate() {
        let row = maps
            .iter()
            .map(|b| map_psnr(a, b).map(|v| if v.is_finite() { json!(v) } else { json!("inf") }))
            .collect::<sharpnet_core::Result<Vec<_>>>()?;
        table.push(json!({ "kernel": kernels[i].to_string(), "psnr": row }));
    }
    let report = json!({
        "threshold_db": config.haar.threshold_db,
        "kept": kept.iter().map(|&i| kernels[i].to_string()).collect::<Vec<_>>(),
        "dropped": (0..kernels.len()).filter(|i| !kept.contains(i)).map(|i| kernels[i].to_string()).collect::<Vec<_>>(),
        "psnr_table": table,
    });
    emit(out, &report.to_string())?;
    Ok(report)
}

/// Splits the dataset into prepared train/val/test sets.
pub fn prepare_splits(config: &RunConfig, dataset: &Dataset) -> Result<[Prepared; 3]> {
    let split = sharpnet_core::data::split_dataset(dataset.samples.len(), &config.data.split)?;
    let prep = |idx: &[usize]| {
        let samples: Vec<&Sample> = idx.iter().map(|&i| &dataset.samples[i]).collect();
        Prepared::new(
            &samples,
            &config.model,
            &config.haar.kernels,
            config.haar.refine_with_masks,
        )
    };
    Ok([prep(&split.train)?, prep(&split.val)?, prep(&split.test)?])
}

/// Trains on the configured dataset. Writes `train_log.jsonl`, `best.ckpt`
/// (highest validation IoU) and `final.ckpt` under `out_dir`.
pub fn train_command(config: &RunConfig, out_dir: &Path, out: &mut dyn Write) -> Result<()> {
    let dataset = load(config)?;
    let [train_set, val_set, _] = prepare_splits(config, &dataset)?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    let log_path = out_dir.join("train_log.jsonl");
    let mut log = Vec::new();
    let kernels = config.haar.kernels.clone();
    let net = train(config, &train_set, &val_set, |entry, net, best| {
        let line = serde_json::to_string(entry).expect("log entries serialize");
        emit(out, &line)?;
        log.extend_from_slice(line.as_bytes());
        log.push(b'\n');
        crate::files::write_bytes(&log_path, &log)?;
        if best {
            checkpoint::save(
                &out_dir.join("best.ckpt"),
                &Checkpoint {
                    net: net.clone(),
                    haar_kernels: kernels.clone(),
                },
            )?;
        }
        Ok(())
    })?;
    checkpoint::save(
        &out_dir.join("final.ckpt"),
        &Checkpoint {
            net,
            haar_kernels: kernels,
        },
    )
}

/// Which part of the dataset `evaluate` scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Subset {
    Train,
    Val,
    Test,
    All,
}

pub fn report_json(report: &MetricReport, palette: &Palette) -> serde_json::Value {
    let per_class: serde_json::Map<String, serde_json::Value> = palette
        .entries()
        .iter()
        .enumerate()
        .filter(|(i, _)| *i < report.per_class_iou.len())
        .map(|(i, e)| {
            (
                e.name.clone(),
                json!({
                    "iou": report.per_class_iou[i],
                    "f1": report.per_class_f1[i],
                    "recall": report.per_class_recall[i],
                }),
            )
        })
        .collect();
    json!({
        "iou_bg": report.iou_bg,
        "iou_nobg": report.iou_nobg,
        "fwiou": report.fwiou,
        "ciw_fwiou": report.ciw_fwiou,
        "f1": report.f1,
        "bal_acc": report.bal_acc,
        "mcc": report.mcc,
        "per_class": per_class,
    })
}

/// Scores a checkpoint on one subset of the configured dataset and prints
/// the flat metrics JSON.
pub fn evaluate_command(
    config: &RunConfig,
    ckpt_path: &Path,
    subset: Subset,
    out: &mut dyn Write,
) -> Result<serde_json::Value> {
    let ckpt = checkpoint::load(ckpt_path)?;
    let dataset = load(config)?;
    let mut config = config.clone();
    config.model = ckpt.net.config().clone();
    config.haar.kernels = ckpt.haar_kernels.clone();
    let data = match subset {
        Subset::All => {
            let all: Vec<&Sample> = dataset.samples.iter().collect();
            Prepared::new(&all, &config.model, &config.haar.kernels, config.haar.refine_with_masks)?
        }
        s => {
            let [train_set, val_set, test_set] = prepare_splits(&config, &dataset)?;
            match s {
                Subset::Train => train_set,
                Subset::Val => val_set,
                _ => test_set,
            }
        }
    };
    if data.is_empty() {
        return Err(CliError::Data("selected subset is empty".into()));
    }
    let (_, matrix) = evaluate(&ckpt.net, &data, config.train.batch_size)?;
    let ciw = dataset.palette.ciw_weights();
    let weights = (ciw.len() == matrix.num_classes()).then_some(ciw.as_slice());
    let report = report_json(&matrix.report(weights)?, &dataset.palette);
    emit(out, &report.to_string())?;
    Ok(report)
}

/// Palette for writing predictions: the given file, else the built-in
/// culvert/sewer palette when the class count matches, else a generated one.
pub fn palette_for(path: Option<&Path>, num_classes: usize) -> Result<Palette> {
    match path {
        Some(p) => crate::files::load_palette(p),
        None if num_classes == Palette::culvert_sewer().len() => Ok(Palette::culvert_sewer()),
        None => Ok(Palette::synthetic(num_classes)?),
    }
}

/// Segments one PNG and writes `<out>/<stem>_mask.png`; returns its path.
pub fn predict_command(ckpt_path: &Path, image_path: &Path, palette: Option<&Path>, out_dir: &Path) -> Result<PathBuf> {
    let ckpt = checkpoint::load(ckpt_path)?;
    let config = ckpt.net.config();
    let img = read_png(image_path)?;
    let [h, w, _] = config.input_dims;
    if (img.height, img.width) != (h, w) {
        return Err(CliError::Data(format!(
            "{} is {}×{} but the model expects {}×{}",
            image_path.display(),
            img.width,
            img.height,
            w,
            h
        )));
    }
    let sample = Sample::new(
        "input".into(),
        img.width,
        img.height,
        img.data,
        ClassMap::filled(w, h, 0),
    )?;
    let bank = feature_bank(&sample, &ckpt.haar_kernels, None, config)?;
    let pred = ckpt.net.predict(&sample.image_tensor(), bank.as_ref())?;
    let palette = palette_for(palette, config.num_classes)?;
    let rgb = encode_mask_rgb(&pred[0], &palette)?;
    let stem = image_path.file_stem().and_then(|s| s.to_str()).unwrap_or("image");
    let path = out_dir.join(format!("{stem}_mask.png"));
    write_png(&path, w, h, rgb)?;
    Ok(path)
}

pub fn count_params(config: &SharpNetConfig, out: &mut dyn Write) -> Result<usize> {
    let n = SharpNet::new(config.clone())?.count_parameters();
    emit(out, &n.to_string())?;
    Ok(n)
}

/// Finite-difference check of every parameter on one random image, mask and
/// bank. Fails with a numeric error when any tensor exceeds
/// [`GRAD_TOLERANCE`].
pub fn grad_check(config: &SharpNetConfig, seed: u64, out: &mut dyn Write) -> Result<f64> {
    let mut net = SharpNet::new(config.clone())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [h, w, c] = config.input_dims;
    let image = Tensor::from_fn(&[1, h, w, c], |_| rng.gen::<f64>());
    let bank = config
        .bank_dims()
        .map(|(bh, bw)| Tensor::from_fn(&[1, bh, bw, config.injection.bank_channels], |_| rng.gen::<f64>()));
    let mask = ClassMap::new(
        w,
        h,
        (0..w * h).map(|_| rng.gen_range(0..config.num_classes) as u8).collect(),
    )?;
    let targets = encode_one_hot(&mask, config.num_classes)?;
    let report = check_model_gradients(&mut net, &image, bank.as_ref(), &targets, 1e-4)?;
    let mut worst = 0.0f64;
    for r in &report {
        emit(
            out,
            &json!({
                "param": r.name,
                "entries": r.entries,
                "rel_error": r.rel_error,
                "restepped": r.restepped,
                "unresolved": r.unresolved,
            })
            .to_string(),
        )?;
        worst = worst.max(r.rel_error);
    }
    emit(
        out,
        &json!({ "max_rel_error": worst, "tolerance": GRAD_TOLERANCE }).to_string(),
    )?;
    if worst.is_nan() || worst >= GRAD_TOLERANCE {
        return Err(CliError::Numeric(format!(
            "max relative gradient error {worst:.3e} exceeds {GRAD_TOLERANCE:e}"
        )));
    }
    Ok(worst)
}

/// Writes a synthetic dataset in the on-disk layout.
pub fn gen_synthetic_command(spec: &SyntheticSpec, out_dir: &Path) -> Result<()> {
    let samples = gen_synthetic_with(spec)?;
    let palette = Palette::synthetic(spec.num_classes)?;
    save_dataset(out_dir, &Dataset { palette, samples })
}
