//! Masks, palettes, one-hot targets, dataset splits and the synthetic
//! dataset generator.

mod palette;
mod split;
mod synthetic;

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::tensor::Tensor;

pub use palette::{decode_mask, encode_mask_rgb, ColorMode, Palette, PaletteEntry};
pub use split::{split_dataset, Split, SplitSpec};
pub use synthetic::{gen_synthetic, gen_synthetic_with, Appearance, Sample, Structure, SyntheticSpec, Texture};

/// Per-pixel class indices, row-major. Class 0 is background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMap {
    width: usize,
    height: usize,
    classes: Vec<u8>,
}

impl ClassMap {
    pub fn new(width: usize, height: usize, classes: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || classes.len() != width * height {
            bail!(
                InvalidShape,
                "class map {}×{} with {} entries",
                width,
                height,
                classes.len()
            );
        }
        Ok(Self { width, height, classes })
    }

    pub fn filled(width: usize, height: usize, class: u8) -> Self {
        Self {
            width,
            height,
            classes: vec![class; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn classes(&self) -> &[u8] {
        &self.classes
    }

    pub fn classes_mut(&mut self) -> &mut [u8] {
        &mut self.classes
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.classes[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, class: u8) {
        self.classes[y * self.width + x] = class;
    }

    pub fn max_class(&self) -> u8 {
        self.classes.iter().copied().max().unwrap_or(0)
    }
}

/// 1×H×W×K indicator tensor.
pub fn encode_one_hot(mask: &ClassMap, num_classes: usize) -> Result<Tensor> {
    if num_classes == 0 {
        bail!(InvalidArgument, "one-hot encoding needs at least one class");
    }
    let mut data = vec![0.0; mask.classes.len() * num_classes];
    for (p, &c) in mask.classes.iter().enumerate() {
        if c as usize >= num_classes {
            bail!(
                Data,
                "pixel ({}, {}) has class {} but K = {}",
                p % mask.width,
                p / mask.width,
                c,
                num_classes
            );
        }
        data[p * num_classes + c as usize] = 1.0;
    }
    Tensor::new(vec![1, mask.height, mask.width, num_classes], data)
}

/// Per-pixel argmax over the last axis of an N×H×W×K tensor; ties go to
/// the lowest class index.
pub fn argmax_classes(logits: &Tensor) -> Result<Vec<ClassMap>> {
    let [n, h, w, k] = logits.dims4()?;
    if k > 256 {
        bail!(InvalidShape, "{} classes do not fit a class map", k);
    }
    let mut out = Vec::with_capacity(n);
    for b in 0..n {
        let mut classes = Vec::with_capacity(h * w);
        for p in 0..h * w {
            let row = &logits.data()[(b * h * w + p) * k..][..k];
            let mut best = 0;
            for (c, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = c;
                }
            }
            classes.push(best as u8);
        }
        out.push(ClassMap::new(w, h, classes)?);
    }
    Ok(out)
}
