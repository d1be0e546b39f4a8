use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Serialize};

use super::integral::IntegralImage;
use crate::error::{bail, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HaarFamily {
    /// Left half minus right half.
    VerticalEdge,
    /// Top half minus bottom half.
    HorizontalEdge,
    /// Outer quarters minus the middle half, split along x (w/4 : w/2 : w/4).
    VerticalLine,
    /// Outer quarters minus the middle half, split along y.
    HorizontalLine,
    /// Top-left plus bottom-right minus the off-diagonal quadrants.
    Diagonal,
}

impl HaarFamily {
    pub const ALL: [HaarFamily; 5] = [
        HaarFamily::VerticalEdge,
        HaarFamily::HorizontalEdge,
        HaarFamily::VerticalLine,
        HaarFamily::HorizontalLine,
        HaarFamily::Diagonal,
    ];

    pub fn code(self) -> &'static str {
        match self {
            HaarFamily::VerticalEdge => "vedge",
            HaarFamily::HorizontalEdge => "hedge",
            HaarFamily::VerticalLine => "vline",
            HaarFamily::HorizontalLine => "hline",
            HaarFamily::Diagonal => "diag",
        }
    }

    fn from_code(code: &str) -> Option<Self> {
        HaarFamily::ALL.into_iter().find(|f| f.code() == code)
    }
}

/// A rectangular Haar-like filter: family, window and cascade depth.
///
/// Written as `<family>:<w>x<h>[:x2]`, e.g. `vedge:4x2:x2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HaarKernel {
    family: HaarFamily,
    width: usize,
    height: usize,
    cascade_depth: u8,
}

impl HaarKernel {
    pub fn new(family: HaarFamily, width: usize, height: usize, cascade_depth: u8) -> Result<Self> {
        if !width.is_power_of_two() || !height.is_power_of_two() {
            bail!(InvalidArgument, "window {}x{} must use powers of two", width, height);
        }
        if !(1..=2).contains(&cascade_depth) {
            bail!(InvalidArgument, "cascade depth must be 1 or 2, got {}", cascade_depth);
        }
        let ok = match family {
            HaarFamily::VerticalEdge => width.is_multiple_of(2),
            HaarFamily::HorizontalEdge => height.is_multiple_of(2),
            HaarFamily::VerticalLine => width.is_multiple_of(4),
            HaarFamily::HorizontalLine => height.is_multiple_of(4),
            HaarFamily::Diagonal => width.is_multiple_of(2) && height.is_multiple_of(2),
        };
        if !ok {
            bail!(
                InvalidArgument,
                "window {}x{} cannot be split for {}",
                width,
                height,
                family.code()
            );
        }
        Ok(Self {
            family,
            width,
            height,
            cascade_depth,
        })
    }

    pub fn family(&self) -> HaarFamily {
        self.family
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cascade_depth(&self) -> u8 {
        self.cascade_depth
    }

    pub fn with_depth(self, cascade_depth: u8) -> Result<Self> {
        Self::new(self.family, self.width, self.height, cascade_depth)
    }

    /// The five-map default bank.
    pub fn default_bank() -> Vec<HaarKernel> {
        use HaarFamily::*;
        [
            (VerticalEdge, 4, 2),
            (HorizontalEdge, 4, 4),
            (VerticalLine, 8, 4),
            (HorizontalLine, 16, 4),
            (Diagonal, 4, 4),
        ]
        .into_iter()
        .map(|(f, w, h)| HaarKernel::new(f, w, h, 1).expect("default windows are valid"))
        .collect()
    }

    /// Signed rectangle combination with the window's top-left at `(x, y)`.
    pub(crate) fn evaluate(&self, ii: &IntegralImage, x: usize, y: usize) -> f64 {
        let s = |dx: usize, dy: usize, w: usize, h: usize| ii.rect_sum_unchecked(x + dx, y + dy, w, h);
        let (w, h) = (self.width, self.height);
        match self.family {
            HaarFamily::VerticalEdge => s(0, 0, w / 2, h) - s(w / 2, 0, w / 2, h),
            HaarFamily::HorizontalEdge => s(0, 0, w, h / 2) - s(0, h / 2, w, h / 2),
            HaarFamily::VerticalLine => {
                let q = w / 4;
                s(0, 0, q, h) + s(3 * q, 0, q, h) - s(q, 0, 2 * q, h)
            }
            HaarFamily::HorizontalLine => {
                let q = h / 4;
                s(0, 0, w, q) + s(0, 3 * q, w, q) - s(0, q, w, 2 * q)
            }
            HaarFamily::Diagonal => {
                let (hw, hh) = (w / 2, h / 2);
                s(0, 0, hw, hh) + s(hw, hh, hw, hh) - s(hw, 0, hw, hh) - s(0, hh, hw, hh)
            }
        }
    }
}

/// Response of `kernel` with its window's top-left corner at `(x, y)`.
pub fn haar_response(ii: &IntegralImage, kernel: &HaarKernel, x: usize, y: usize) -> Result<f64> {
    if x + kernel.width > ii.width() || y + kernel.height > ii.height() {
        bail!(
            OutOfBounds,
            "{} window at ({}, {}) overflows {}×{} image",
            kernel,
            x,
            y,
            ii.width(),
            ii.height()
        );
    }
    Ok(kernel.evaluate(ii, x, y))
}

impl fmt::Display for HaarKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}x{}", self.family.code(), self.width, self.height)?;
        if self.cascade_depth == 2 {
            f.write_str(":x2")?;
        }
        Ok(())
    }
}

impl FromStr for HaarKernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(alloc::format!("bad kernel spec {:?}", s));
        let mut parts = s.split(':');
        let family = parts.next().and_then(HaarFamily::from_code).ok_or_else(bad)?;
        let (w, h) = parts.next().and_then(|p| p.split_once('x')).ok_or_else(bad)?;
        let width = w.parse().map_err(|_| bad())?;
        let height = h.parse().map_err(|_| bad())?;
        let depth = match parts.next() {
            None => 1,
            Some("x2") => 2,
            Some(_) => return Err(bad()),
        };
        if parts.next().is_some() {
            return Err(bad());
        }
        HaarKernel::new(family, width, height, depth)
    }
}

impl Serialize for HaarKernel {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> core::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for HaarKernel {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> core::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(|e: Error| serde::de::Error::custom(e.to_string()))
    }
}
