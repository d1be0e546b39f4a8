use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ClassMap;
use crate::error::{bail, Result};
use crate::haar::GrayImage;
use crate::tensor::Tensor;

/// One image with its ground-truth mask.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub id: String,
    pub width: usize,
    pub height: usize,
    /// Interleaved 8-bit RGB.
    pub image: Vec<u8>,
    pub mask: ClassMap,
}

impl Sample {
    pub fn new(id: String, width: usize, height: usize, image: Vec<u8>, mask: ClassMap) -> Result<Self> {
        if image.len() != width * height * 3 {
            bail!(
                InvalidShape,
                "sample {}: {} bytes for {}×{} RGB",
                id,
                image.len(),
                width,
                height
            );
        }
        if (mask.width(), mask.height()) != (width, height) {
            bail!(InvalidShape, "sample {}: mask dims differ from image", id);
        }
        Ok(Self {
            id,
            width,
            height,
            image,
            mask,
        })
    }

    /// 1×H×W×3 tensor scaled to [0, 1].
    pub fn image_tensor(&self) -> Tensor {
        Tensor::new(
            alloc::vec![1, self.height, self.width, 3],
            self.image.iter().map(|&v| v as f64 / 255.0).collect(),
        )
        .expect("sample dims are validated")
    }

    pub fn gray(&self) -> GrayImage {
        GrayImage::from_rgb8(self.width, self.height, &self.image).expect("sample dims are validated")
    }
}

/// Shape family drawn for a class. Class `c ≥ 1` uses `ALL[(c − 1) % 5]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Structure {
    VerticalBar,
    DiagonalBar,
    Rectangle,
    Circle,
    HorizontalBar,
}

impl Structure {
    pub const ALL: [Structure; 5] = [
        Structure::VerticalBar,
        Structure::DiagonalBar,
        Structure::Rectangle,
        Structure::Circle,
        Structure::HorizontalBar,
    ];

    pub fn for_class(class: u8) -> Self {
        Self::ALL[(class as usize - 1) % Self::ALL.len()]
    }
}

// Membership test in pixel coordinates (evaluated at 2×2 block centres).
fn inside(shape: &Shape, x: f64, y: f64) -> bool {
    match *shape {
        Shape::Rect { x0, y0, x1, y1 } => x >= x0 && x < x1 && y >= y0 && y < y1,
        Shape::Disc { cx, cy, r } => (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r,
        Shape::Band {
            cx,
            cy,
            half_len,
            half_width,
            slope,
        } => {
            // Unit direction (1, slope)/√(1+slope²).
            let norm = libm::sqrt(1.0 + slope * slope);
            let (dx, dy) = (x - cx, y - cy);
            let along = (dx + slope * dy) / norm;
            let across = (dy - slope * dx) / norm;
            along.abs() <= half_len && across.abs() <= half_width
        }
    }
}

enum Shape {
    Rect {
        x0: f64,
        y0: f64,
        x1: f64,
        y1: f64,
    },
    Disc {
        cx: f64,
        cy: f64,
        r: f64,
    },
    Band {
        cx: f64,
        cy: f64,
        half_len: f64,
        half_width: f64,
        slope: f64,
    },
}

fn even_in(rng: &mut ChaCha8Rng, lo: usize, hi: usize) -> f64 {
    (2 * rng.gen_range(lo / 2..=hi / 2)) as f64
}

fn make_shape(rng: &mut ChaCha8Rng, kind: Structure, w: usize, h: usize) -> Shape {
    let (wf, hf) = (w as f64, h as f64);
    match kind {
        Structure::VerticalBar => {
            let bw = even_in(rng, 4, 6);
            let len = even_in(rng, h * 3 / 8, h * 5 / 8);
            let x0 = even_in(rng, 0, w - bw as usize);
            let y0 = even_in(rng, 0, h - len as usize);
            Shape::Rect {
                x0,
                y0,
                x1: x0 + bw,
                y1: y0 + len,
            }
        }
        Structure::HorizontalBar => {
            let bh = even_in(rng, 4, 6);
            let len = even_in(rng, w * 3 / 8, w * 5 / 8);
            let x0 = even_in(rng, 0, w - len as usize);
            let y0 = even_in(rng, 0, h - bh as usize);
            Shape::Rect {
                x0,
                y0,
                x1: x0 + len,
                y1: y0 + bh,
            }
        }
        Structure::Rectangle => {
            let rw = even_in(rng, w / 6, w / 4);
            let rh = even_in(rng, h / 6, h / 4);
            let x0 = even_in(rng, 0, w - rw as usize);
            let y0 = even_in(rng, 0, h - rh as usize);
            Shape::Rect {
                x0,
                y0,
                x1: x0 + rw,
                y1: y0 + rh,
            }
        }
        Structure::Circle => {
            let r = rng.gen_range(wf.min(hf) / 12.0..wf.min(hf) / 8.0);
            let cx = rng.gen_range(r..wf - r);
            let cy = rng.gen_range(r..hf - r);
            Shape::Disc { cx, cy, r }
        }
        Structure::DiagonalBar => {
            let half_len = rng.gen_range(wf.min(hf) / 5.0..wf.min(hf) / 3.2);
            let reach = half_len / libm::sqrt(2.0);
            let cx = rng.gen_range(reach..wf - reach);
            let cy = rng.gen_range(reach..hf - reach);
            let slope = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            Shape::Band {
                cx,
                cy,
                half_len,
                half_width: 2.2,
                slope,
            }
        }
    }
}

/// How class regions are painted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Appearance {
    /// Flat fill mixing a dark or bright level with a per-class hue.
    #[default]
    Tinted,
    /// Flat dark or bright fill shared by all classes; geometry is the only cue.
    Flat,
    /// Regions carry an oriented two-tone pattern (see [`Texture`]) averaging
    /// to the background level, so mean intensity and hue carry no class information.
    Textured,
}

/// Pattern painted in [`Appearance::Textured`] mode. Class `c ≥ 1` uses
/// `ALL[(c − 1) % 5]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Texture {
    /// Columns alternating every 2 pixels.
    VerticalStripes,
    /// 2×2 checkerboard.
    Checker,
    /// Rows alternating every 2 pixels.
    HorizontalStripes,
    /// Columns alternating every 4 pixels.
    WideVerticalStripes,
    /// Rows alternating every 4 pixels.
    WideHorizontalStripes,
}

impl Texture {
    pub const ALL: [Texture; 5] = [
        Texture::VerticalStripes,
        Texture::Checker,
        Texture::HorizontalStripes,
        Texture::WideVerticalStripes,
        Texture::WideHorizontalStripes,
    ];

    pub fn for_class(class: u8) -> Self {
        Self::ALL[(class as usize - 1) % Self::ALL.len()]
    }

    /// `+1` or `−1` at pixel `(x, y)`.
    pub fn sign(self, x: usize, y: usize) -> f64 {
        let bright = match self {
            Texture::VerticalStripes => (x / 2).is_multiple_of(2),
            Texture::Checker => (x / 2 + y / 2).is_multiple_of(2),
            Texture::HorizontalStripes => (y / 2).is_multiple_of(2),
            Texture::WideVerticalStripes => (x / 4).is_multiple_of(2),
            Texture::WideHorizontalStripes => (y / 4).is_multiple_of(2),
        };
        if bright {
            1.0
        } else {
            -1.0
        }
    }
}

fn make_patch(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Shape {
    if rng.gen_bool(0.5) {
        let rw = even_in(rng, w / 4, w * 3 / 8);
        let rh = even_in(rng, h / 4, h * 3 / 8);
        let x0 = even_in(rng, 0, w - rw as usize);
        let y0 = even_in(rng, 0, h - rh as usize);
        Shape::Rect {
            x0,
            y0,
            x1: x0 + rw,
            y1: y0 + rh,
        }
    } else {
        let (wf, hf) = (w as f64, h as f64);
        let r = rng.gen_range(wf.min(hf) / 8.0..wf.min(hf) / 5.0);
        let cx = rng.gen_range(r..wf - r);
        let cy = rng.gen_range(r..hf - r);
        Shape::Disc { cx, cy, r }
    }
}

/// Generation options; see [`gen_synthetic`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub count: usize,
    pub width: usize,
    pub height: usize,
    pub num_classes: usize,
    pub seed: u64,
    pub appearance: Appearance,
}

/// `count` images of axis-aligned rectangles, vertical, horizontal and
/// diagonal bars and discs over textured noise, one structure family per
/// class, with exact masks. Geometry is snapped to 2×2 pixel blocks. Use
/// [`gen_synthetic_with`] for the other [`Appearance`] modes.
pub fn gen_synthetic(count: usize, width: usize, height: usize, num_classes: usize, seed: u64) -> Result<Vec<Sample>> {
    gen_synthetic_with(&SyntheticSpec {
        count,
        width,
        height,
        num_classes,
        seed,
        appearance: Appearance::Tinted,
    })
}

pub fn gen_synthetic_with(spec: &SyntheticSpec) -> Result<Vec<Sample>> {
    let &SyntheticSpec {
        count,
        width: w,
        height: h,
        num_classes: k,
        seed,
        appearance,
    } = spec;
    if !(2..=256).contains(&k) {
        bail!(InvalidArgument, "synthetic data needs 2..=256 classes, got {}", k);
    }
    if w < 16 || h < 16 || w % 2 != 0 || h % 2 != 0 {
        bail!(
            InvalidArgument,
            "synthetic images must be even-sized and at least 16×16, got {}×{}",
            w,
            h
        );
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Per-class tint; background stays grey.
    let tints: Vec<[f64; 3]> = (0..k)
        .map(|c| {
            let hue = c as f64 / k as f64;
            [
                0.5 + 0.5 * libm::cos(2.0 * core::f64::consts::PI * hue),
                0.5 + 0.5 * libm::cos(2.0 * core::f64::consts::PI * (hue - 1.0 / 3.0)),
                0.5 + 0.5 * libm::cos(2.0 * core::f64::consts::PI * (hue - 2.0 / 3.0)),
            ]
        })
        .collect();
    let (bw, bh) = (w / 2, h / 2);
    let mut samples = Vec::with_capacity(count);
    for i in 0..count {
        let base = rng.gen_range(0.35..0.6);
        let fx = rng.gen_range(0.05..0.2);
        let fy = rng.gen_range(0.05..0.2);
        let phase = rng.gen_range(0.0..core::f64::consts::TAU);
        let mut rgb: Vec<[f64; 3]> = (0..w * h)
            .map(|p| {
                let (x, y) = ((p % w) as f64, (p / w) as f64);
                [base + 0.06 * libm::sin(fx * x + fy * y + phase); 3]
            })
            .collect();
        let mut mask = ClassMap::filled(w, h, 0);

        // Every class appears at least once across the set; others are optional.
        let guaranteed = 1 + (i % (k - 1)) as u8;
        for class in 1..k as u8 {
            let draws = if class == guaranteed {
                1
            } else {
                usize::from(rng.gen_bool(0.5))
            };
            for _ in 0..draws {
                let shape = match appearance {
                    Appearance::Textured => make_patch(&mut rng, w, h),
                    _ => make_shape(&mut rng, Structure::for_class(class), w, h),
                };
                let dark = rng.gen_bool(0.5);
                let level = if dark {
                    rng.gen_range(0.05..0.2)
                } else {
                    rng.gen_range(0.8..0.95)
                };
                let amplitude = if appearance == Appearance::Textured {
                    rng.gen_range(0.2..0.3)
                } else {
                    0.0
                };
                let texture = Texture::for_class(class);
                for by in 0..bh {
                    for bx in 0..bw {
                        let (cx, cy) = (2.0 * bx as f64 + 1.0, 2.0 * by as f64 + 1.0);
                        if !inside(&shape, cx, cy) {
                            continue;
                        }
                        for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                            let (x, y) = (2 * bx + dx, 2 * by + dy);
                            rgb[y * w + x] = match appearance {
                                Appearance::Tinted => {
                                    let t = tints[class as usize];
                                    [
                                        0.5 * level + 0.5 * t[0],
                                        0.5 * level + 0.5 * t[1],
                                        0.5 * level + 0.5 * t[2],
                                    ]
                                }
                                Appearance::Flat => [level; 3],
                                Appearance::Textured => [base + amplitude * texture.sign(x, y); 3],
                            };
                            mask.set(x, y, class);
                        }
                    }
                }
            }
        }
        let image = rgb
            .iter()
            .flat_map(|px| {
                let mut out = [0u8; 3];
                for (o, &v) in out.iter_mut().zip(px) {
                    let noisy = v + rng.gen_range(-0.05..0.05);
                    *o = libm::round(noisy.clamp(0.0, 1.0) * 255.0) as u8;
                }
                out
            })
            .collect();
        samples.push(Sample::new(format!("synth_{:04}", i), w, h, image, mask)?);
    }
    Ok(samples)
}
