//! Batching, the epoch loop and validation.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sharpnet_core::data::{argmax_classes, encode_one_hot, ClassMap, Sample};
use sharpnet_core::haar::{build_feature_bank, HaarKernel};
use sharpnet_core::metrics::ConfusionMatrix;
use sharpnet_core::model::{SharpNet, SharpNetConfig};
use sharpnet_core::optim::AdamHyper;
use sharpnet_core::Tensor;

use crate::config::RunConfig;
use crate::error::{CliError, Result};

/// Model-ready tensors for a set of samples. Feature banks are computed once
/// up front.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub images: Vec<Tensor>,
    pub targets: Vec<Tensor>,
    pub masks: Vec<ClassMap>,
    pub banks: Option<Vec<Tensor>>,
}

/// Injected feature bank for one image at the model's injection resolution.
/// `mask` zeroes background responses when given.
pub fn feature_bank(
    sample: &Sample,
    kernels: &[HaarKernel],
    mask: Option<&ClassMap>,
    model: &SharpNetConfig,
) -> Result<Option<Tensor>> {
    let Some((h, w)) = model.bank_dims() else {
        return Ok(None);
    };
    Ok(Some(
        build_feature_bank(&sample.gray(), kernels, mask, (w, h))?.to_tensor(),
    ))
}

impl Prepared {
    pub fn new(
        samples: &[&Sample],
        model: &SharpNetConfig,
        kernels: &[HaarKernel],
        refine_with_masks: bool,
    ) -> Result<Self> {
        let [h, w, _] = model.input_dims;
        let mut out = Self {
            images: Vec::with_capacity(samples.len()),
            targets: Vec::with_capacity(samples.len()),
            masks: Vec::with_capacity(samples.len()),
            banks: model.injection.enabled.then(Vec::new),
        };
        for s in samples {
            if (s.height, s.width) != (h, w) {
                return Err(CliError::Data(format!(
                    "sample {} is {}×{} but the model expects {}×{}",
                    s.id, s.width, s.height, w, h
                )));
            }
            if s.mask.max_class() as usize >= model.num_classes {
                return Err(CliError::Data(format!(
                    "sample {} has class {} but the model has {} classes",
                    s.id,
                    s.mask.max_class(),
                    model.num_classes
                )));
            }
            out.images.push(s.image_tensor());
            out.targets.push(encode_one_hot(&s.mask, model.num_classes)?);
            out.masks.push(s.mask.clone());
            if let Some(banks) = &mut out.banks {
                let mask = refine_with_masks.then_some(&s.mask);
                banks.push(feature_bank(s, kernels, mask, model)?.expect("injection enabled"));
            }
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    /// Stacked image, bank and target tensors for the given indices.
    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor, Option<Tensor>, Tensor)> {
        let pick = |v: &[Tensor]| Tensor::stack(&indices.iter().map(|&i| v[i].clone()).collect::<Vec<_>>());
        let banks = self.banks.as_deref().map(pick).transpose()?;
        Ok((pick(&self.images)?, banks, pick(&self.targets)?))
    }
}

/// Mean loss and confusion matrix of `net` over `data`.
pub fn evaluate(net: &SharpNet, data: &Prepared, batch_size: usize) -> Result<(f64, ConfusionMatrix)> {
    let mut matrix = ConfusionMatrix::new(net.config().num_classes);
    let mut loss_sum = 0.0;
    let indices: Vec<usize> = (0..data.len()).collect();
    for chunk in indices.chunks(batch_size.max(1)) {
        let (images, banks, targets) = data.batch(chunk)?;
        let (g, out, loss) = net.loss_graph(&images, banks.as_ref(), &targets, false)?;
        loss_sum += g.value(loss).data()[0] * chunk.len() as f64;
        for (pred, &i) in argmax_classes(g.value(out.logits))?.iter().zip(chunk) {
            matrix.accumulate(pred, &data.masks[i])?;
        }
    }
    Ok((loss_sum / data.len().max(1) as f64, matrix))
}

/// One JSON line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_iou: f64,
    pub val_f1: f64,
    pub wall_ms: u64,
}

/// Fresh network with Adam state at the configured learning rate.
pub fn init_network(config: &RunConfig) -> Result<SharpNet> {
    let mut net = SharpNet::new(config.model.clone())?;
    net.enable_adam(AdamHyper {
        lr: config.train.lr,
        ..AdamHyper::default()
    });
    Ok(net)
}

/// Runs `config.train.epochs` epochs of shuffled mini-batch Adam. After each
/// epoch `on_epoch` receives the log line, the network and whether the
/// validation IoU (with background) is the best so far.
pub fn train(
    config: &RunConfig,
    train: &Prepared,
    val: &Prepared,
    mut on_epoch: impl FnMut(&EpochLog, &SharpNet, bool) -> Result<()>,
) -> Result<SharpNet> {
    if train.is_empty() {
        return Err(CliError::Data("empty training set".into()));
    }
    let mut net = init_network(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.train.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best = f64::NEG_INFINITY;
    let start = Instant::now();
    for epoch in 1..=config.train.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.train.batch_size) {
            let (images, banks, targets) = train.batch(chunk)?;
            loss_sum += net.train_step(&images, banks.as_ref(), &targets)? * chunk.len() as f64;
        }
        let (val_loss, val_iou, val_f1) = if val.is_empty() {
            (f64::NAN, 0.0, 0.0)
        } else {
            let (loss, m) = evaluate(&net, val, config.train.batch_size)?;
            (loss, m.iou(true).1.unwrap_or(0.0), m.f1_macro())
        };
        let log = EpochLog {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            val_loss,
            val_iou,
            val_f1,
            wall_ms: start.elapsed().as_millis() as u64,
        };
        let improved = val_iou > best;
        if improved {
            best = val_iou;
        }
        on_epoch(&log, &net, improved)?;
    }
    Ok(net)
}
