use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};

/// Dense row-major `f64` array. Image-like tensors use the N×H×W×C layout.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            bail!(InvalidShape, "zero-sized dimension in {:?}", shape);
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            bail!(
                InvalidShape,
                "shape {:?} needs {} values, got {}",
                shape,
                expected,
                data.len()
            );
        }
        Ok(Self { shape, data })
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        let len = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: vec![value; len],
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, 1.0)
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> f64) -> Self {
        let len: usize = shape.iter().product();
        Self {
            shape: shape.to_vec(),
            data: (0..len).map(&mut f).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_scalar(&self) -> bool {
        self.data.len() == 1
    }

    /// Interprets the tensor as N×H×W×C.
    pub fn dims4(&self) -> Result<[usize; 4]> {
        match self.shape.as_slice() {
            &[n, h, w, c] => Ok([n, h, w, c]),
            other => bail!(InvalidShape, "expected rank-4 N×H×W×C tensor, got {:?}", other),
        }
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Self::new(shape, self.data)
    }

    /// Concatenates tensors of identical shape along a new leading batch axis,
    /// collapsing an existing leading axis of size 1 (so `1×H×W×C` items
    /// stack to `N×H×W×C`).
    pub fn stack(items: &[Tensor]) -> Result<Self> {
        let Some(first) = items.first() else {
            bail!(InvalidShape, "cannot stack an empty list");
        };
        let item_shape = first.shape();
        if items.iter().any(|t| t.shape() != item_shape) {
            bail!(InvalidShape, "stacked tensors must share a shape");
        }
        let mut shape = Vec::with_capacity(item_shape.len() + 1);
        if item_shape.len() > 1 && item_shape[0] == 1 {
            shape.push(items.len());
            shape.extend_from_slice(&item_shape[1..]);
        } else {
            shape.push(items.len());
            shape.extend_from_slice(item_shape);
        }
        let mut data = Vec::with_capacity(first.len() * items.len());
        for t in items {
            data.extend_from_slice(t.data());
        }
        Self::new(shape, data)
    }

    /// Returns batch item `index` of an N×… tensor as a 1×… tensor.
    pub fn batch_item(&self, index: usize) -> Result<Self> {
        let n = self.shape[0];
        if index >= n {
            bail!(OutOfBounds, "batch index {} out of range for N={}", index, n);
        }
        let stride = self.len() / n;
        let mut shape = self.shape.clone();
        shape[0] = 1;
        Self::new(shape, self.data[index * stride..(index + 1) * stride].to_vec())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Border handling for sliding-window operations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Padding {
    /// Output extent is `ceil(input / stride)`; the window is centred and
    /// the overhang is split with the smaller half before the data.
    Same,
    /// Only windows lying fully inside the input.
    Valid,
}

/// Output extent and leading padding for one spatial axis.
pub(crate) fn window_geometry(input: usize, window: usize, stride: usize, padding: Padding) -> Result<(usize, usize)> {
    if window == 0 || stride == 0 {
        bail!(InvalidArgument, "window and stride must be positive");
    }
    match padding {
        Padding::Valid => {
            if window > input {
                bail!(InvalidShape, "window {} larger than input extent {}", window, input);
            }
            Ok(((input - window) / stride + 1, 0))
        }
        Padding::Same => {
            let out = input.div_ceil(stride);
            let needed = (out - 1) * stride + window;
            let total = needed.saturating_sub(input);
            if window > input + total {
                bail!(InvalidShape, "window {} larger than padded input", window);
            }
            Ok((out, total / 2))
        }
    }
}
