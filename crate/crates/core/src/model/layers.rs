//! Parameterized building blocks. Each layer holds indices into a
//! [`ParamStore`]; forward passes look the parameters up in the slice of
//! graph nodes the store was registered as.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{bail, Result};
use crate::graph::{Graph, NodeId};
use crate::tensor::{Padding, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(pub usize);

/// Named parameter tensors in creation order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: String, tensor: Tensor) -> ParamId {
        debug_assert!(!self.names.contains(&name), "duplicate parameter {name}");
        self.names.push(name);
        self.tensors.push(tensor);
        ParamId(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn element_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Registers every parameter as a leaf, in store order.
    pub fn register(&self, g: &mut Graph, trainable: bool) -> Vec<NodeId> {
        self.tensors
            .iter()
            .map(|t| {
                if trainable {
                    g.variable(t.clone())
                } else {
                    g.constant(t.clone())
                }
            })
            .collect()
    }

    /// Replaces the tensors, keeping names; shapes must match.
    pub fn replace_tensors(&mut self, tensors: Vec<Tensor>) -> Result<()> {
        if tensors.len() != self.tensors.len() {
            bail!(
                InvalidShape,
                "{} tensors for {} parameters",
                tensors.len(),
                self.tensors.len()
            );
        }
        for ((name, old), new) in self.names.iter().zip(&self.tensors).zip(&tensors) {
            if old.shape() != new.shape() {
                bail!(
                    InvalidShape,
                    "{}: shape {:?} expected {:?}",
                    name,
                    new.shape(),
                    old.shape()
                );
            }
        }
        self.tensors = tensors;
        Ok(())
    }
}

/// He-style uniform initializer: U(±√(6 / fan_in)).
fn he_uniform(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize) -> Tensor {
    let bound = libm::sqrt(6.0 / fan_in as f64);
    Tensor::from_fn(shape, |_| rng.gen_range(-bound..bound))
}

/// 1×1 convolution with bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pointwise {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Pointwise {
    pub fn new(store: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str, cin: usize, cout: usize) -> Self {
        let weight = store.add(format!("{name}.weight"), he_uniform(rng, &[cin, cout], cin));
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(&[cout]));
        Self { weight, bias }
    }

    pub fn forward(&self, g: &mut Graph, params: &[NodeId], x: NodeId) -> Result<NodeId> {
        g.pointwise_conv(x, params[self.weight.0], params[self.bias.0])
    }
}

/// k×k depth-wise convolution (no bias) followed by a 1×1 point-wise
/// convolution with bias and ReLU.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DsConv {
    pub depthwise: ParamId,
    pub pointwise: Pointwise,
}

impl DsConv {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
        name: &str,
        cin: usize,
        cout: usize,
        k: usize,
    ) -> Result<Self> {
        if k != 3 && k != 5 {
            bail!(InvalidArgument, "depth-wise separable kernels are 3 or 5, got {}", k);
        }
        let depthwise = store.add(format!("{name}.depthwise"), he_uniform(rng, &[k, k, cin], k * k));
        let pointwise = Pointwise::new(store, rng, &format!("{name}.pointwise"), cin, cout);
        Ok(Self { depthwise, pointwise })
    }

    /// Closed-form parameter count `C·k² + C·K + K`.
    pub fn parameter_count(cin: usize, cout: usize, k: usize) -> usize {
        cin * k * k + cin * cout + cout
    }

    /// Depth-wise then point-wise, without the activation.
    pub fn forward_linear(&self, g: &mut Graph, params: &[NodeId], x: NodeId) -> Result<NodeId> {
        let dw = g.depthwise_conv(x, params[self.depthwise.0], 1, Padding::Same)?;
        self.pointwise.forward(g, params, dw)
    }

    pub fn forward(&self, g: &mut Graph, params: &[NodeId], x: NodeId) -> Result<NodeId> {
        let y = self.forward_linear(g, params, x)?;
        g.relu(y)
    }
}

/// Four parallel branches of `out/4` channels each: 3×3 and 5×5
/// depth-wise separable convolutions, 3×3 max-pool + 1×1 projection, and a
/// plain 1×1 projection; concatenated in that order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inception {
    pub branch3: DsConv,
    pub branch5: DsConv,
    pub pool_proj: Pointwise,
    pub proj: Pointwise,
}

impl Inception {
    pub fn new(store: &mut ParamStore, rng: &mut ChaCha8Rng, name: &str, cin: usize, cout: usize) -> Result<Self> {
        if cout == 0 || !cout.is_multiple_of(4) {
            bail!(InvalidArgument, "inception output channels {} not divisible by 4", cout);
        }
        let b = cout / 4;
        Ok(Self {
            branch3: DsConv::new(store, rng, &format!("{name}.branch3x3"), cin, b, 3)?,
            branch5: DsConv::new(store, rng, &format!("{name}.branch5x5"), cin, b, 5)?,
            pool_proj: Pointwise::new(store, rng, &format!("{name}.branch_pool"), cin, b),
            proj: Pointwise::new(store, rng, &format!("{name}.branch1x1"), cin, b),
        })
    }

    pub fn parameter_count(cin: usize, cout: usize) -> usize {
        let b = cout / 4;
        DsConv::parameter_count(cin, b, 3) + DsConv::parameter_count(cin, b, 5) + 2 * (cin * b + b)
    }

    pub fn forward(&self, g: &mut Graph, params: &[NodeId], x: NodeId) -> Result<NodeId> {
        let a = self.branch3.forward(g, params, x)?;
        let b = self.branch5.forward(g, params, x)?;
        let pooled = g.max_pool(x, 3, 1, Padding::Same)?;
        let c = self.pool_proj.forward(g, params, pooled)?;
        let c = g.relu(c)?;
        let d = self.proj.forward(g, params, x)?;
        let d = g.relu(d)?;
        g.concat_channels(&[a, b, c, d])
    }
}

/// Feature injection gate: bank → 3×3 depth-wise separable conv to the
/// level's width → 1×1 conv → logistic → elementwise product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InjectionGate {
    pub conv: DsConv,
    pub proj: Pointwise,
}

impl InjectionGate {
    pub fn new(
        store: &mut ParamStore,
        rng: &mut ChaCha8Rng,
        name: &str,
        bank_channels: usize,
        channels: usize,
    ) -> Result<Self> {
        Ok(Self {
            conv: DsConv::new(store, rng, &format!("{name}.conv"), bank_channels, channels, 3)?,
            proj: Pointwise::new(store, rng, &format!("{name}.proj"), channels, channels),
        })
    }

    pub fn parameter_count(bank_channels: usize, channels: usize) -> usize {
        DsConv::parameter_count(bank_channels, channels, 3) + channels * channels + channels
    }

    /// The gate values in (0, 1), same shape as the level features.
    pub fn gate(&self, g: &mut Graph, params: &[NodeId], bank: NodeId) -> Result<NodeId> {
        let h = self.conv.forward(g, params, bank)?;
        let z = self.proj.forward(g, params, h)?;
        g.sigmoid(z)
    }

    pub fn forward(&self, g: &mut Graph, params: &[NodeId], features: NodeId, bank: NodeId) -> Result<NodeId> {
        let fs = g.value(features).dims4()?;
        let bs = g.value(bank).dims4()?;
        if fs[..3] != bs[..3] {
            bail!(
                InvalidShape,
                "bank {:?} does not match level features {:?}",
                &bs[..3],
                &fs[..3]
            );
        }
        let gate = self.gate(g, params, bank)?;
        g.mul(features, gate)
    }
}
