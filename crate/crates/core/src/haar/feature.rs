use alloc::vec;
use alloc::vec::Vec;

use super::integral::{GrayImage, IntegralImage};
use super::kernel::HaarKernel;
use crate::data::ClassMap;
use crate::error::{bail, Result};
use crate::tensor::Tensor;

/// Min/max used to rescale a response map to [0, 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub min: f64,
    pub max: f64,
}

/// A normalized filter response with the same dims as its source image.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
    norm: Normalization,
}

impl FeatureMap {
    /// Min-max normalizes `raw` into [0, 1]. A flat map (range within
    /// rounding noise of `scale`) becomes all zeros.
    pub fn normalize(width: usize, height: usize, raw: &[f64], scale: f64) -> Result<Self> {
        if raw.len() != width * height || raw.is_empty() {
            bail!(InvalidShape, "{} responses for a {}×{} map", raw.len(), width, height);
        }
        let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
        let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let range = max - min;
        let values = if range <= 1e-12 * scale.max(1.0) {
            vec![0.0; raw.len()]
        } else {
            raw.iter().map(|&v| (v - min) / range).collect()
        };
        Ok(Self {
            width,
            height,
            values,
            norm: Normalization { min, max },
        })
    }

    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height || values.is_empty() {
            bail!(InvalidShape, "{} values for a {}×{} map", values.len(), width, height);
        }
        Ok(Self {
            width,
            height,
            values,
            norm: Normalization { min: 0.0, max: 1.0 },
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn normalization(&self) -> Normalization {
        self.norm
    }

    /// Undoes the normalization. Flat maps come back as their constant value.
    pub fn denormalize(&self) -> Vec<f64> {
        let Normalization { min, max } = self.norm;
        self.values.iter().map(|&v| min + v * (max - min)).collect()
    }

    pub fn as_image(&self) -> GrayImage {
        GrayImage::new(self.width, self.height, self.values.clone()).expect("map dims are valid")
    }

    pub fn resize_nearest(&self, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            bail!(InvalidShape, "cannot resize to {}×{}", width, height);
        }
        if (width, height) == (self.width, self.height) {
            return Ok(self.clone());
        }
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            let sy = y * self.height / height;
            for x in 0..width {
                let sx = x * self.width / width;
                values.push(self.values[sy * self.width + sx]);
            }
        }
        Ok(Self {
            width,
            height,
            values,
            norm: self.norm,
        })
    }
}

/// Un-normalized dense response map. Output pixel `(px, py)` holds the
/// response of the window whose top-left is `(px − w/2, py − h/2)`; pixels
/// whose window would leave the image are zero.
pub fn raw_response_map(image: &GrayImage, kernel: &HaarKernel) -> Result<Vec<f64>> {
    let (w, h) = (image.width(), image.height());
    if kernel.width() > w || kernel.height() > h {
        bail!(InvalidShape, "kernel {} larger than {}×{} image", kernel, w, h);
    }
    let ii = IntegralImage::new(image);
    let (hw, hh) = (kernel.width() / 2, kernel.height() / 2);
    let mut raw = vec![0.0; w * h];
    for py in hh..=(h + hh - kernel.height()) {
        for px in hw..=(w + hw - kernel.width()) {
            raw[py * w + px] = kernel.evaluate(&ii, px - hw, py - hh);
        }
    }
    Ok(raw)
}

/// Single-stage dense filtering followed by min-max normalization.
pub fn apply_haar_filter(image: &GrayImage, kernel: &HaarKernel) -> Result<FeatureMap> {
    let raw = raw_response_map(image, kernel)?;
    let scale: f64 = image.pixels().iter().map(|v| v.abs()).sum();
    FeatureMap::normalize(image.width(), image.height(), &raw, scale)
}

/// Depth 1 is [`apply_haar_filter`]; depth 2 filters the normalized depth-1
/// response again with the same kernel.
pub fn cascade_apply(image: &GrayImage, kernel: &HaarKernel, depth: u8) -> Result<FeatureMap> {
    match depth {
        1 => apply_haar_filter(image, kernel),
        2 => {
            let first = apply_haar_filter(image, kernel)?;
            apply_haar_filter(&first.as_image(), kernel)
        }
        other => bail!(InvalidArgument, "cascade depth must be 1 or 2, got {}", other),
    }
}

impl HaarKernel {
    /// Filters at this kernel's own cascade depth.
    pub fn apply(&self, image: &GrayImage) -> Result<FeatureMap> {
        cascade_apply(image, self, self.cascade_depth())
    }
}

/// `10·log10(max² / MSE)` in dB; identical inputs give `f64::INFINITY`.
pub fn psnr(a: &[f64], b: &[f64], max_val: f64) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        bail!(InvalidShape, "psnr inputs have {} and {} values", a.len(), b.len());
    }
    if max_val.is_nan() || max_val <= 0.0 {
        bail!(InvalidArgument, "max_val must be positive, got {}", max_val);
    }
    let mse = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * libm::log10(max_val * max_val / mse))
}

/// PSNR between two normalized maps (peak value 1).
pub fn map_psnr(a: &FeatureMap, b: &FeatureMap) -> Result<f64> {
    if (a.width, a.height) != (b.width, b.height) {
        bail!(
            InvalidShape,
            "map dims {}×{} vs {}×{}",
            a.width,
            a.height,
            b.width,
            b.height
        );
    }
    psnr(&a.values, &b.values, 1.0)
}

pub const DEFAULT_THRESHOLD_DB: f64 = 18.0;

/// Greedy redundancy filter in input order: a candidate survives iff its
/// PSNR against every already-kept map is below `threshold_db`.
pub fn select_features(candidates: &[FeatureMap], threshold_db: f64) -> Result<Vec<usize>> {
    if candidates.is_empty() {
        bail!(InvalidArgument, "no candidate feature maps");
    }
    let mut kept: Vec<usize> = Vec::new();
    for (i, cand) in candidates.iter().enumerate() {
        let mut distinct = true;
        for &j in &kept {
            if map_psnr(cand, &candidates[j])? >= threshold_db {
                distinct = false;
                break;
            }
        }
        if distinct {
            kept.push(i);
        }
    }
    Ok(kept)
}

/// Zeroes responses on background (class 0) pixels.
pub fn refine_with_mask(feature: &FeatureMap, mask: &ClassMap) -> Result<FeatureMap> {
    if (mask.width(), mask.height()) != (feature.width, feature.height) {
        bail!(
            InvalidShape,
            "mask {}×{} does not match map {}×{}",
            mask.width(),
            mask.height(),
            feature.width,
            feature.height
        );
    }
    let values = feature
        .values
        .iter()
        .zip(mask.classes())
        .map(|(&v, &c)| if c != 0 { v } else { 0.0 })
        .collect();
    Ok(FeatureMap {
        values,
        ..feature.clone()
    })
}

/// Refined response maps stacked as channels, in kernel order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBank {
    width: usize,
    height: usize,
    maps: Vec<FeatureMap>,
    kernels: Vec<HaarKernel>,
}

impl FeatureBank {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.maps.len()
    }

    pub fn maps(&self) -> &[FeatureMap] {
        &self.maps
    }

    pub fn kernels(&self) -> &[HaarKernel] {
        &self.kernels
    }

    /// 1×H×W×B tensor, channel `b` taken from map `b`.
    pub fn to_tensor(&self) -> Tensor {
        let b = self.maps.len();
        let mut data = Vec::with_capacity(self.width * self.height * b);
        for p in 0..self.width * self.height {
            data.extend(self.maps.iter().map(|m| m.values[p]));
        }
        Tensor::new(vec![1, self.height, self.width, b], data).expect("bank dims are consistent")
    }
}

/// Filters `image` with every kernel, optionally refines with `mask`, and
/// resizes each map to `target` = (width, height) by nearest neighbour.
pub fn build_feature_bank(
    image: &GrayImage,
    kernels: &[HaarKernel],
    mask: Option<&ClassMap>,
    target: (usize, usize),
) -> Result<FeatureBank> {
    if kernels.is_empty() {
        bail!(InvalidArgument, "feature bank needs at least one kernel");
    }
    let (tw, th) = target;
    let maps = kernels
        .iter()
        .map(|k| {
            let mut map = k.apply(image)?;
            if let Some(mask) = mask {
                map = refine_with_mask(&map, mask)?;
            }
            map.resize_nearest(tw, th)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureBank {
        width: tw,
        height: th,
        maps,
        kernels: kernels.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::haar::haar_response;

    fn step_image(w: usize, h: usize) -> GrayImage {
        GrayImage::new(
            w,
            h,
            (0..w * h).map(|i| if i % w < w / 2 { 1.0 } else { 0.0 }).collect(),
        )
        .unwrap()
    }

    #[test]
    fn constant_image_gives_zero_map() {
        for value in [0.0, 0.3, 1.0] {
            let img = GrayImage::new(16, 16, vec![value; 256]).unwrap();
            for k in HaarKernel::default_bank() {
                let m = apply_haar_filter(&img, &k).unwrap();
                assert_eq!((m.width(), m.height()), (16, 16));
                assert!(m.values().iter().all(|&v| v == 0.0), "{k} on {value}");
            }
        }
    }

    #[test]
    fn interior_matches_pointwise_response() {
        let img = step_image(16, 8);
        let ii = IntegralImage::new(&img);
        let k: HaarKernel = "vedge:4x2".parse().unwrap();
        let raw = raw_response_map(&img, &k).unwrap();
        for py in 1..8 {
            for px in 2..=14 {
                assert_eq!(raw[py * 16 + px], haar_response(&ii, &k, px - 2, py - 1).unwrap());
            }
        }
        let m = apply_haar_filter(&img, &k).unwrap();
        let back = m.denormalize();
        for (a, b) in back.iter().zip(&raw) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_larger_than_image() {
        let img = step_image(8, 8);
        let k: HaarKernel = "hline:16x4".parse().unwrap();
        assert!(apply_haar_filter(&img, &k).is_err());
    }

    #[test]
    fn cascade_depths() {
        let img = step_image(16, 16);
        let k: HaarKernel = "vedge:4x2".parse().unwrap();
        assert_eq!(
            cascade_apply(&img, &k, 1).unwrap(),
            apply_haar_filter(&img, &k).unwrap()
        );
        let d2 = cascade_apply(&img, &k, 2).unwrap();
        assert_ne!(d2.values(), apply_haar_filter(&img, &k).unwrap().values());
        let flat = GrayImage::new(16, 16, vec![0.7; 256]).unwrap();
        assert!(cascade_apply(&flat, &k, 2).unwrap().values().iter().all(|&v| v == 0.0));
        assert!(cascade_apply(&img, &k, 3).is_err());
    }

    #[test]
    fn psnr_cases() {
        let a = vec![0.25, 0.5, 0.75];
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);
        let b: Vec<f64> = a.iter().map(|v| v + 1.0).collect();
        let expected = 10.0 * libm::log10(255.0 * 255.0);
        assert!((psnr(&a, &b, 255.0).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 48.1308).abs() < 1e-3);
        assert!(psnr(&a, &b[..2], 1.0).is_err());
        assert!(psnr(&a, &b, 0.0).is_err());
    }

    #[test]
    fn selection_edge_cases() {
        let m = FeatureMap::from_values(2, 1, vec![0.0, 1.0]).unwrap();
        assert_eq!(select_features(core::slice::from_ref(&m), 18.0).unwrap(), vec![0]);
        assert_eq!(select_features(&[m.clone(), m], 18.0).unwrap(), vec![0]);
        assert!(select_features(&[], 18.0).is_err());
    }

    #[test]
    fn mask_refinement() {
        let m = FeatureMap::from_values(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let fg = ClassMap::new(2, 2, vec![1, 2, 1, 3]).unwrap();
        assert_eq!(refine_with_mask(&m, &fg).unwrap(), m);
        let bg = ClassMap::new(2, 2, vec![0; 4]).unwrap();
        assert!(refine_with_mask(&m, &bg).unwrap().values().iter().all(|&v| v == 0.0));
        let half = ClassMap::new(2, 2, vec![0, 1, 0, 1]).unwrap();
        let r = refine_with_mask(&m, &half).unwrap();
        assert_eq!(r.values(), &[0.0, 0.2, 0.0, 0.4]);
        assert_eq!(refine_with_mask(&r, &half).unwrap(), r);
        assert!(refine_with_mask(&m, &ClassMap::new(1, 4, vec![0; 4]).unwrap()).is_err());
    }

    #[test]
    fn default_bank_shapes() {
        let img = step_image(32, 32);
        let kernels = HaarKernel::default_bank();
        let bank = build_feature_bank(&img, &kernels, None, (32, 32)).unwrap();
        assert_eq!(bank.channels(), 5);
        for (map, k) in bank.maps().iter().zip(&kernels) {
            assert_eq!(map, &k.apply(&img).unwrap());
        }
        let small = build_feature_bank(&img, &kernels, None, (8, 8)).unwrap();
        assert_eq!(small.to_tensor().shape(), &[1, 8, 8, 5]);
        let flat = GrayImage::new(32, 32, vec![0.4; 1024]).unwrap();
        let mask = ClassMap::new(32, 32, vec![1; 1024]).unwrap();
        let zero = build_feature_bank(&flat, &kernels, Some(&mask), (8, 8)).unwrap();
        assert!(zero.to_tensor().data().iter().all(|&v| v == 0.0));
        assert!(build_feature_bank(&img, &[], None, (8, 8)).is_err());
    }
}
