//! Segmentation metrics computed from a multiclass confusion matrix.
//!
//! Conventions: classes absent from both prediction and truth have no IoU
//! and are left out of means. F1 and balanced accuracy average over the
//! classes present in the truth. A zero denominator yields 0.

use alloc::vec;
use alloc::vec::Vec;

use crate::data::ClassMap;
use crate::error::{bail, Result};

/// `counts[t * k + p]` = pixels of true class `t` predicted as `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            counts: vec![0; k * k],
        }
    }

    pub fn from_counts(k: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != k * k {
            bail!(InvalidShape, "{} counts for a {}×{} matrix", counts.len(), k, k);
        }
        Ok(Self { k, counts })
    }

    pub fn num_classes(&self) -> usize {
        self.k
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.k + pred]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Adds one prediction/truth pair.
    pub fn accumulate(&mut self, pred: &ClassMap, truth: &ClassMap) -> Result<()> {
        if (pred.width(), pred.height()) != (truth.width(), truth.height()) {
            bail!(
                InvalidShape,
                "prediction {}×{} vs truth {}×{}",
                pred.width(),
                pred.height(),
                truth.width(),
                truth.height()
            );
        }
        for (&p, &t) in pred.classes().iter().zip(truth.classes()) {
            let (p, t) = (p as usize, t as usize);
            if p >= self.k || t >= self.k {
                bail!(Data, "class {} outside [0, {})", p.max(t), self.k);
            }
        }
        for (&p, &t) in pred.classes().iter().zip(truth.classes()) {
            self.counts[t as usize * self.k + p as usize] += 1;
        }
        Ok(())
    }

    fn row_sum(&self, c: usize) -> u64 {
        self.counts[c * self.k..(c + 1) * self.k].iter().sum()
    }

    fn col_sum(&self, c: usize) -> u64 {
        (0..self.k).map(|t| self.get(t, c)).sum()
    }

    fn tp_fp_fn(&self, c: usize) -> (f64, f64, f64) {
        let tp = self.get(c, c);
        (tp as f64, (self.col_sum(c) - tp) as f64, (self.row_sum(c) - tp) as f64)
    }

    fn present_in_truth(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.k).filter(|&c| self.row_sum(c) > 0)
    }

    pub fn iou_per_class(&self) -> Vec<Option<f64>> {
        (0..self.k)
            .map(|c| {
                let (tp, fp, fn_) = self.tp_fp_fn(c);
                let denom = tp + fp + fn_;
                (denom > 0.0).then(|| tp / denom)
            })
            .collect()
    }

    /// Per-class IoU and its mean; `None` when no class qualifies.
    pub fn iou(&self, include_background: bool) -> (Vec<Option<f64>>, Option<f64>) {
        let per_class = self.iou_per_class();
        let skip = usize::from(!include_background);
        let used: Vec<f64> = per_class.iter().skip(skip).flatten().copied().collect();
        let mean = (!used.is_empty()).then(|| used.iter().sum::<f64>() / used.len() as f64);
        (per_class, mean)
    }

    /// Weighted IoU. Without weights each class counts by its share of true
    /// pixels; with weights the supplied values are renormalized over the
    /// classes present in the truth.
    pub fn fwiou(&self, weights: Option<&[f64]>) -> Result<f64> {
        let ious = self.iou_per_class();
        let total = self.total();
        match weights {
            None => {
                if total == 0 {
                    return Ok(0.0);
                }
                let weighted: f64 = self
                    .present_in_truth()
                    .map(|c| self.row_sum(c) as f64 * ious[c].unwrap_or(0.0))
                    .sum();
                Ok(weighted / total as f64)
            }
            Some(w) => {
                if w.len() != self.k {
                    bail!(InvalidShape, "{} weights for {} classes", w.len(), self.k);
                }
                let norm: f64 = self.present_in_truth().map(|c| w[c]).sum();
                if norm <= 0.0 {
                    return Ok(0.0);
                }
                let weighted: f64 = self.present_in_truth().map(|c| w[c] * ious[c].unwrap_or(0.0)).sum();
                Ok(weighted / norm)
            }
        }
    }

    pub fn f1_per_class(&self) -> Vec<Option<f64>> {
        (0..self.k)
            .map(|c| {
                let (tp, fp, fn_) = self.tp_fp_fn(c);
                let denom = 2.0 * tp + fp + fn_;
                (denom > 0.0).then(|| 2.0 * tp / denom)
            })
            .collect()
    }

    pub fn recall_per_class(&self) -> Vec<Option<f64>> {
        (0..self.k)
            .map(|c| {
                let rows = self.row_sum(c);
                (rows > 0).then(|| self.get(c, c) as f64 / rows as f64)
            })
            .collect()
    }

    fn mean_over_present(&self, values: &[Option<f64>]) -> f64 {
        let present: Vec<usize> = self.present_in_truth().collect();
        if present.is_empty() {
            return 0.0;
        }
        present.iter().map(|&c| values[c].unwrap_or(0.0)).sum::<f64>() / present.len() as f64
    }

    pub fn f1_macro(&self) -> f64 {
        self.mean_over_present(&self.f1_per_class())
    }

    pub fn balanced_accuracy(&self) -> f64 {
        self.mean_over_present(&self.recall_per_class())
    }

    /// Multiclass Matthews correlation (Gorodkin's R_K).
    pub fn mcc(&self) -> f64 {
        let s = self.total() as f64;
        let c: f64 = (0..self.k).map(|i| self.get(i, i) as f64).sum();
        let mut pt = 0.0;
        let mut pp = 0.0;
        let mut tt = 0.0;
        for i in 0..self.k {
            let p = self.col_sum(i) as f64;
            let t = self.row_sum(i) as f64;
            pt += p * t;
            pp += p * p;
            tt += t * t;
        }
        let denom = (s * s - pp) * (s * s - tt);
        if denom <= 0.0 {
            return 0.0;
        }
        (c * s - pt) / libm::sqrt(denom)
    }

    pub fn report(&self, ciw: Option<&[f64]>) -> Result<MetricReport> {
        let (per_class_iou, iou_bg) = self.iou(true);
        let (_, iou_nobg) = self.iou(false);
        Ok(MetricReport {
            iou_bg,
            iou_nobg,
            fwiou: self.fwiou(None)?,
            ciw_fwiou: ciw.map(|w| self.fwiou(Some(w))).transpose()?,
            f1: self.f1_macro(),
            bal_acc: self.balanced_accuracy(),
            mcc: self.mcc(),
            per_class_iou,
            per_class_f1: self.f1_per_class(),
            per_class_recall: self.recall_per_class(),
        })
    }
}

/// Confusion matrix of one prediction against its truth.
pub fn confusion(pred: &ClassMap, truth: &ClassMap, k: usize) -> Result<ConfusionMatrix> {
    let mut m = ConfusionMatrix::new(k);
    m.accumulate(pred, truth)?;
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub iou_bg: Option<f64>,
    pub iou_nobg: Option<f64>,
    pub fwiou: f64,
    pub ciw_fwiou: Option<f64>,
    pub f1: f64,
    pub bal_acc: f64,
    pub mcc: f64,
    pub per_class_iou: Vec<Option<f64>>,
    pub per_class_f1: Vec<Option<f64>>,
    pub per_class_recall: Vec<Option<f64>>,
}
