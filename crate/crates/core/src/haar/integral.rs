use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};

/// Single-channel image with real-valued pixels, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            bail!(InvalidShape, "empty image {}×{}", width, height);
        }
        if pixels.len() != width * height {
            bail!(
                InvalidShape,
                "{}×{} image needs {} pixels, got {}",
                width,
                height,
                width * height,
                pixels.len()
            );
        }
        Ok(Self { width, height, pixels })
    }

    /// Rec.601 luminance of interleaved 8-bit RGB, scaled to [0, 1].
    pub fn from_rgb8(width: usize, height: usize, rgb: &[u8]) -> Result<Self> {
        if rgb.len() != width * height * 3 {
            bail!(InvalidShape, "rgb buffer length {} for {}×{}", rgb.len(), width, height);
        }
        let pixels = rgb
            .chunks_exact(3)
            .map(|p| (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64) / 255.0)
            .collect();
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }
}

/// Summed-area table with a zero first row and column:
/// `S[y][x]` is the sum of all pixels strictly above and left of `(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralImage {
    width: usize,
    height: usize,
    sums: Vec<f64>,
}

impl IntegralImage {
    pub fn new(image: &GrayImage) -> Self {
        let (w, h) = (image.width, image.height);
        let stride = w + 1;
        let mut sums = vec![0.0; (h + 1) * stride];
        for y in 0..h {
            let mut row = 0.0;
            for x in 0..w {
                row += image.get(x, y);
                sums[(y + 1) * stride + x + 1] = sums[y * stride + x + 1] + row;
            }
        }
        Self {
            width: w,
            height: h,
            sums,
        }
    }

    /// Source image width.
    pub fn width(&self) -> usize {
        self.width
    }

    /// Source image height.
    pub fn height(&self) -> usize {
        self.height
    }

    /// `S[y][x]` for `0 ≤ x ≤ W`, `0 ≤ y ≤ H`.
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.sums[y * (self.width + 1) + x]
    }

    pub fn total(&self) -> f64 {
        self.at(self.width, self.height)
    }

    /// Sum of the `w`×`h` rectangle with top-left pixel `(x, y)`.
    pub fn rect_sum(&self, x: usize, y: usize, w: usize, h: usize) -> Result<f64> {
        if w == 0 || h == 0 {
            bail!(InvalidArgument, "zero-area rectangle {}×{}", w, h);
        }
        if x + w > self.width || y + h > self.height {
            bail!(
                OutOfBounds,
                "rectangle ({}, {}) {}×{} exceeds {}×{} image",
                x,
                y,
                w,
                h,
                self.width,
                self.height
            );
        }
        Ok(self.rect_sum_unchecked(x, y, w, h))
    }

    pub(crate) fn rect_sum_unchecked(&self, x: usize, y: usize, w: usize, h: usize) -> f64 {
        self.at(x + w, y + h) - self.at(x + w, y) - self.at(x, y + h) + self.at(x, y)
    }
}

/// Builds the summed-area table. Empty images cannot be constructed, so this
/// cannot fail.
pub fn integral_image(image: &GrayImage) -> IntegralImage {
    IntegralImage::new(image)
}
