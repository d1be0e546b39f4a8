//! Tape-based reverse-mode automatic differentiation.
//!
//! A [`Graph`] is an append-only list of nodes. Every operation evaluates
//! eagerly, stores its output and whatever context its backward rule needs,
//! and returns a [`NodeId`]. Inputs always refer to earlier nodes, so a
//! single reverse sweep over the tape is a valid topological order.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::tensor::{window_geometry, Padding, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    DepthwiseConv {
        input: NodeId,
        kernel: NodeId,
        stride: usize,
        pad: (usize, usize),
    },
    PointwiseConv {
        input: NodeId,
        weight: NodeId,
        bias: NodeId,
    },
    MaxPool {
        input: NodeId,
        window: usize,
        stride: usize,
        pad: (usize, usize),
    },
    Upsample2x {
        input: NodeId,
    },
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Relu(NodeId),
    Sigmoid(NodeId),
    Concat(Vec<NodeId>),
    Sum(NodeId),
    SoftmaxCrossEntropy {
        logits: NodeId,
        targets: NodeId,
        probs: Vec<f64>,
    },
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Tensor,
    requires_grad: bool,
}

#[derive(Debug, Clone, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    grads: Vec<Option<Vec<f64>>>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op, value: Tensor, requires_grad: bool) -> NodeId {
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        self.grads.push(None);
        NodeId(self.nodes.len() - 1)
    }

    fn node(&self, id: NodeId) -> Result<&Node> {
        match self.nodes.get(id.0) {
            Some(n) => Ok(n),
            None => bail!(Contract, "node {} does not belong to this graph", id.0),
        }
    }

    fn needs_grad(&self, ids: &[NodeId]) -> bool {
        ids.iter().any(|id| self.nodes[id.0].requires_grad)
    }

    /// Leaf that does not receive a gradient (images, targets, feature banks).
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, value, false)
    }

    /// Leaf that accumulates a gradient during [`Graph::backward`].
    pub fn variable(&mut self, value: Tensor) -> NodeId {
        self.push(Op::Leaf, value, true)
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    /// Gradient of the last backward root with respect to `id`, if it was reached.
    pub fn grad(&self, id: NodeId) -> Option<Tensor> {
        let data = self.grads.get(id.0)?.as_ref()?;
        Some(
            Tensor::new(self.nodes[id.0].value.shape().to_vec(), data.clone())
                .expect("gradient buffers mirror value shapes"),
        )
    }

    /// Per-channel spatial convolution. `kernel` is k×k×C with k odd.
    pub fn depthwise_conv(&mut self, input: NodeId, kernel: NodeId, stride: usize, padding: Padding) -> Result<NodeId> {
        let x = &self.node(input)?.value;
        let kt = &self.node(kernel)?.value;
        let [n, h, w, c] = x.dims4()?;
        let &[k, k2, kc] = kt.shape() else {
            bail!(InvalidShape, "depthwise kernel must be k×k×C, got {:?}", kt.shape());
        };
        if k != k2 || k % 2 == 0 {
            bail!(
                InvalidShape,
                "depthwise kernel must be square with odd size, got {}×{}",
                k,
                k2
            );
        }
        if kc != c {
            bail!(InvalidShape, "depthwise kernel has {} channels, input has {}", kc, c);
        }
        let (oh, pt) = window_geometry(h, k, stride, padding)?;
        let (ow, pl) = window_geometry(w, k, stride, padding)?;
        let xd = x.data();
        let kd = kt.data();
        let mut out = vec![0.0; n * oh * ow * c];
        for b in 0..n {
            for oy in 0..oh {
                for ox in 0..ow {
                    let o = ((b * oh + oy) * ow + ox) * c;
                    let dst = &mut out[o..o + c];
                    for ky in 0..k {
                        let Some(iy) = (oy * stride + ky).checked_sub(pt).filter(|&v| v < h) else {
                            continue;
                        };
                        for kx in 0..k {
                            let Some(ix) = (ox * stride + kx).checked_sub(pl).filter(|&v| v < w) else {
                                continue;
                            };
                            let src = &xd[((b * h + iy) * w + ix) * c..][..c];
                            let wk = &kd[(ky * k + kx) * c..][..c];
                            for ((d, &s), &wv) in dst.iter_mut().zip(src).zip(wk) {
                                *d += s * wv;
                            }
                        }
                    }
                }
            }
        }
        let value = Tensor::new(vec![n, oh, ow, c], out)?;
        let rg = self.needs_grad(&[input, kernel]);
        Ok(self.push(
            Op::DepthwiseConv {
                input,
                kernel,
                stride,
                pad: (pt, pl),
            },
            value,
            rg,
        ))
    }

    /// 1×1 convolution: every pixel's channel vector goes through `x·W + b`
    /// with `W` of shape C×K and `b` of shape K.
    pub fn pointwise_conv(&mut self, input: NodeId, weight: NodeId, bias: NodeId) -> Result<NodeId> {
        let x = &self.node(input)?.value;
        let wt = &self.node(weight)?.value;
        let bt = &self.node(bias)?.value;
        let [n, h, w, c] = x.dims4()?;
        let &[wc, k] = wt.shape() else {
            bail!(InvalidShape, "pointwise weights must be C×K, got {:?}", wt.shape());
        };
        if wc != c {
            bail!(
                InvalidShape,
                "pointwise weights expect {} channels, input has {}",
                wc,
                c
            );
        }
        if bt.shape() != [k] {
            bail!(
                InvalidShape,
                "pointwise bias must have shape [{}], got {:?}",
                k,
                bt.shape()
            );
        }
        let pixels = n * h * w;
        let mut out = Vec::with_capacity(pixels * k);
        for _ in 0..pixels {
            out.extend_from_slice(bt.data());
        }
        gemm(pixels, c, k, x.data(), false, wt.data(), false, &mut out);
        let value = Tensor::new(vec![n, h, w, k], out)?;
        let rg = self.needs_grad(&[input, weight, bias]);
        Ok(self.push(Op::PointwiseConv { input, weight, bias }, value, rg))
    }

    /// Max over each window; ties resolve to the first element in row-major
    /// window order, which is also where the backward pass sends the gradient.
    pub fn max_pool(&mut self, input: NodeId, window: usize, stride: usize, padding: Padding) -> Result<NodeId> {
        let x = &self.node(input)?.value;
        let [n, h, w, c] = x.dims4()?;
        let (oh, pt) = window_geometry(h, window, stride, padding)?;
        let (ow, pl) = window_geometry(w, window, stride, padding)?;
        let xd = x.data();
        let mut out = vec![0.0; n * oh * ow * c];
        for b in 0..n {
            for oy in 0..oh {
                for ox in 0..ow {
                    let o = ((b * oh + oy) * ow + ox) * c;
                    let dst = &mut out[o..o + c];
                    let mut first = true;
                    for_window(oy, ox, window, stride, (pt, pl), h, w, |iy, ix| {
                        let base = ((b * h + iy) * w + ix) * c;
                        let src = &xd[base..base + c];
                        if first {
                            dst.copy_from_slice(src);
                            first = false;
                        } else {
                            for (d, &v) in dst.iter_mut().zip(src) {
                                *d = d.max(v);
                            }
                        }
                    });
                }
            }
        }
        let value = Tensor::new(vec![n, oh, ow, c], out)?;
        let rg = self.needs_grad(&[input]);
        Ok(self.push(
            Op::MaxPool {
                input,
                window,
                stride,
                pad: (pt, pl),
            },
            value,
            rg,
        ))
    }

    /// Nearest-neighbour ×2 upsampling: each pixel becomes a 2×2 block.
    pub fn upsample2x(&mut self, input: NodeId) -> Result<NodeId> {
        let x = &self.node(input)?.value;
        let [n, h, w, c] = x.dims4()?;
        let (oh, ow) = (2 * h, 2 * w);
        let xd = x.data();
        let mut out = Vec::with_capacity(n * oh * ow * c);
        for b in 0..n {
            for oy in 0..oh {
                for ox in 0..ow {
                    let src = ((b * h + oy / 2) * w + ox / 2) * c;
                    out.extend_from_slice(&xd[src..src + c]);
                }
            }
        }
        let value = Tensor::new(vec![n, oh, ow, c], out)?;
        let rg = self.needs_grad(&[input]);
        Ok(self.push(Op::Upsample2x { input }, value, rg))
    }

    fn same_shape(&self, a: NodeId, b: NodeId, what: &str) -> Result<()> {
        let (sa, sb) = (self.node(a)?.value.shape(), self.node(b)?.value.shape());
        if sa != sb {
            bail!(InvalidShape, "{}: shape {:?} vs {:?}", what, sa, sb);
        }
        Ok(())
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape(a, b, "add")?;
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| x + y).collect();
        let value = Tensor::new(va.shape().to_vec(), data)?;
        let rg = self.needs_grad(&[a, b]);
        Ok(self.push(Op::Add(a, b), value, rg))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape(a, b, "multiply")?;
        let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| x * y).collect();
        let value = Tensor::new(va.shape().to_vec(), data)?;
        let rg = self.needs_grad(&[a, b]);
        Ok(self.push(Op::Mul(a, b), value, rg))
    }

    pub fn scale(&mut self, a: NodeId, factor: f64) -> Result<NodeId> {
        let value = self.node(a)?.value.map(|v| v * factor);
        let rg = self.needs_grad(&[a]);
        Ok(self.push(Op::Scale(a, factor), value, rg))
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        let value = self.node(a)?.value.map(|v| if v > 0.0 { v } else { 0.0 });
        let rg = self.needs_grad(&[a]);
        Ok(self.push(Op::Relu(a), value, rg))
    }

    /// Logistic activation.
    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId> {
        let value = self.node(a)?.value.map(sigmoid);
        let rg = self.needs_grad(&[a]);
        Ok(self.push(Op::Sigmoid(a), value, rg))
    }

    /// Concatenates N×H×W×Cᵢ tensors along the channel axis, in order.
    pub fn concat_channels(&mut self, inputs: &[NodeId]) -> Result<NodeId> {
        let Some(&first) = inputs.first() else {
            bail!(InvalidShape, "concat of an empty list");
        };
        let [n, h, w, _] = self.node(first)?.value.dims4()?;
        let mut widths = Vec::with_capacity(inputs.len());
        for &id in inputs {
            let [n2, h2, w2, c] = self.node(id)?.value.dims4()?;
            if (n2, h2, w2) != (n, h, w) {
                bail!(
                    InvalidShape,
                    "concat inputs disagree on N×H×W: {:?} vs {:?}",
                    [n, h, w],
                    [n2, h2, w2]
                );
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let pixels = n * h * w;
        let mut out = Vec::with_capacity(pixels * total);
        for p in 0..pixels {
            for (&id, &c) in inputs.iter().zip(&widths) {
                out.extend_from_slice(&self.nodes[id.0].value.data()[p * c..(p + 1) * c]);
            }
        }
        let value = Tensor::new(vec![n, h, w, total], out)?;
        let rg = self.needs_grad(inputs);
        Ok(self.push(Op::Concat(inputs.to_vec()), value, rg))
    }

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        let value = Tensor::scalar(self.node(a)?.value.sum());
        let rg = self.needs_grad(&[a]);
        Ok(self.push(Op::Sum(a), value, rg))
    }

    /// Mean over all pixels of the categorical cross-entropy between
    /// `softmax(logits)` and one-hot `targets`, both N×H×W×K.
    pub fn softmax_cross_entropy(&mut self, logits: NodeId, targets: NodeId) -> Result<NodeId> {
        let l = &self.node(logits)?.value;
        let t = &self.node(targets)?.value;
        let [n, h, w, k] = l.dims4()?;
        let [tn, th, tw, tk] = t.dims4()?;
        if tk != k {
            bail!(InvalidShape, "logits have {} classes, targets {}", k, tk);
        }
        if (tn, th, tw) != (n, h, w) {
            bail!(
                InvalidShape,
                "targets {:?} do not match logits {:?}",
                t.shape(),
                l.shape()
            );
        }
        let pixels = n * h * w;
        let mut probs = vec![0.0; pixels * k];
        let mut total = 0.0;
        for p in 0..pixels {
            let row = &l.data()[p * k..][..k];
            let trow = &t.data()[p * k..][..k];
            let tsum: f64 = trow.iter().sum();
            if (tsum - 1.0).abs() > 1e-9 {
                bail!(Contract, "target row {} sums to {}, expected 1", p, tsum);
            }
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for (pr, &v) in probs[p * k..][..k].iter_mut().zip(row) {
                *pr = libm::exp(v - m);
                z += *pr;
            }
            let log_z = libm::log(z);
            for ((pr, &v), &tv) in probs[p * k..][..k].iter_mut().zip(row).zip(trow) {
                *pr /= z;
                if tv != 0.0 {
                    total -= tv * (v - m - log_z);
                }
            }
        }
        let value = Tensor::scalar(total / pixels as f64);
        let rg = self.needs_grad(&[logits]);
        Ok(self.push(Op::SoftmaxCrossEntropy { logits, targets, probs }, value, rg))
    }

    /// Per-pixel softmax probabilities saved by a cross-entropy node.
    pub fn softmax_probs(&self, loss: NodeId) -> Option<&[f64]> {
        match &self.nodes.get(loss.0)?.op {
            Op::SoftmaxCrossEntropy { probs, .. } => Some(probs),
            _ => None,
        }
    }

    /// True when `other` was built by the same sequence of operations and
    /// every ReLU and max-pool took the same branch, i.e. both graphs lie in
    /// the same linear piece of the network's non-smooth parts.
    pub fn same_branches(&self, other: &Graph) -> bool {
        if self.nodes.len() != other.nodes.len() {
            return false;
        }
        self.nodes.iter().zip(&other.nodes).all(|(a, b)| match (&a.op, &b.op) {
            (&Op::Relu(x), &Op::Relu(y)) => {
                let (xv, yv) = (self.nodes[x.0].value.data(), other.nodes[y.0].value.data());
                xv.len() == yv.len() && xv.iter().zip(yv).all(|(&p, &q)| (p > 0.0) == (q > 0.0))
            }
            (Op::MaxPool { .. }, Op::MaxPool { .. }) => pool_argmax(&self.nodes, a) == pool_argmax(&other.nodes, b),
            (Op::Relu(_), _) | (Op::MaxPool { .. }, _) => false,
            _ => true,
        })
    }

    /// Reverse sweep from a scalar `root`. Clears gradients from any earlier
    /// sweep, seeds d(root)/d(root) = 1 and accumulates by addition at fan-out.
    pub fn backward(&mut self, root: NodeId) -> Result<()> {
        let root_value = &self.node(root)?.value;
        if !root_value.is_scalar() {
            bail!(
                Contract,
                "backward root must be scalar, got shape {:?}",
                root_value.shape()
            );
        }
        for g in &mut self.grads {
            *g = None;
        }
        self.grads[root.0] = Some(vec![1.0]);
        for i in (0..=root.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(upstream) = self.grads[i].take() else {
                continue;
            };
            self.propagate(i, &upstream);
            self.grads[i] = Some(upstream);
        }
        Ok(())
    }

    fn propagate(&mut self, i: usize, g: &[f64]) {
        let nodes = &self.nodes;
        let grads = &mut self.grads;
        match &nodes[i].op {
            Op::Leaf => {}
            &Op::DepthwiseConv {
                input,
                kernel,
                stride,
                pad: (pt, pl),
            } => {
                let x = &nodes[input.0].value;
                let kt = &nodes[kernel.0].value;
                let [n, h, w, c] = x.dims4().expect("checked in forward");
                let k = kt.shape()[0];
                let [_, oh, ow, _] = nodes[i].value.dims4().expect("checked in forward");
                let xd = x.data();
                let kd = kt.data();
                let mut dx = grad_buf(nodes, grads, input).map(core::mem::take);
                let mut dk = grad_buf(nodes, grads, kernel).map(core::mem::take);
                for b in 0..n {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let o = ((b * oh + oy) * ow + ox) * c;
                            let go = &g[o..o + c];
                            for ky in 0..k {
                                let Some(iy) = (oy * stride + ky).checked_sub(pt).filter(|&v| v < h) else {
                                    continue;
                                };
                                for kx in 0..k {
                                    let Some(ix) = (ox * stride + kx).checked_sub(pl).filter(|&v| v < w) else {
                                        continue;
                                    };
                                    let xi = ((b * h + iy) * w + ix) * c;
                                    let ki = (ky * k + kx) * c;
                                    if let Some(dx) = dx.as_mut() {
                                        let dst = &mut dx[xi..xi + c];
                                        for ((d, &gv), &kv) in dst.iter_mut().zip(go).zip(&kd[ki..ki + c]) {
                                            *d += gv * kv;
                                        }
                                    }
                                    if let Some(dk) = dk.as_mut() {
                                        let dst = &mut dk[ki..ki + c];
                                        for ((d, &gv), &xv) in dst.iter_mut().zip(go).zip(&xd[xi..xi + c]) {
                                            *d += gv * xv;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                if let Some(v) = dx {
                    grads[input.0] = Some(v);
                }
                if let Some(v) = dk {
                    grads[kernel.0] = Some(v);
                }
            }
            &Op::PointwiseConv { input, weight, bias } => {
                let x = &nodes[input.0].value;
                let wt = &nodes[weight.0].value;
                let c = wt.shape()[0];
                let k = wt.shape()[1];
                let pixels = x.len() / c;
                if let Some(db) = grad_buf(nodes, grads, bias) {
                    for p in 0..pixels {
                        for (d, &gv) in db.iter_mut().zip(&g[p * k..][..k]) {
                            *d += gv;
                        }
                    }
                }
                if let Some(dw) = grad_buf(nodes, grads, weight) {
                    gemm(c, pixels, k, x.data(), true, g, false, dw);
                }
                if let Some(dx) = grad_buf(nodes, grads, input) {
                    gemm(pixels, k, c, g, false, wt.data(), true, dx);
                }
            }
            Op::MaxPool { input, .. } => {
                if nodes[input.0].requires_grad {
                    let argmax = pool_argmax(nodes, &nodes[i]);
                    let dx = grad_buf(nodes, grads, *input).expect("input requires grad");
                    for (&src, &gv) in argmax.iter().zip(g) {
                        dx[src] += gv;
                    }
                }
            }
            &Op::Upsample2x { input } => {
                if let Some(dx) = grad_buf(nodes, grads, input) {
                    let [n, h, w, c] = nodes[input.0].value.dims4().expect("checked in forward");
                    let (oh, ow) = (2 * h, 2 * w);
                    for b in 0..n {
                        for oy in 0..oh {
                            for ox in 0..ow {
                                let src = ((b * h + oy / 2) * w + ox / 2) * c;
                                let o = ((b * oh + oy) * ow + ox) * c;
                                for ch in 0..c {
                                    dx[src + ch] += g[o + ch];
                                }
                            }
                        }
                    }
                }
            }
            &Op::Add(a, b) => {
                for id in [a, b] {
                    if let Some(d) = grad_buf(nodes, grads, id) {
                        for (dv, &gv) in d.iter_mut().zip(g) {
                            *dv += gv;
                        }
                    }
                }
            }
            &Op::Mul(a, b) => {
                for (id, other) in [(a, b), (b, a)] {
                    let ov = nodes[other.0].value.data();
                    if let Some(d) = grad_buf(nodes, grads, id) {
                        for ((dv, &gv), &o) in d.iter_mut().zip(g).zip(ov) {
                            *dv += gv * o;
                        }
                    }
                }
            }
            &Op::Scale(a, factor) => {
                if let Some(d) = grad_buf(nodes, grads, a) {
                    for (dv, &gv) in d.iter_mut().zip(g) {
                        *dv += gv * factor;
                    }
                }
            }
            &Op::Relu(a) => {
                let xv = nodes[a.0].value.data();
                if let Some(d) = grad_buf(nodes, grads, a) {
                    for ((dv, &gv), &x) in d.iter_mut().zip(g).zip(xv) {
                        if x > 0.0 {
                            *dv += gv;
                        }
                    }
                }
            }
            &Op::Sigmoid(a) => {
                let yv = nodes[i].value.data();
                if let Some(d) = grad_buf(nodes, grads, a) {
                    for ((dv, &gv), &y) in d.iter_mut().zip(g).zip(yv) {
                        *dv += gv * y * (1.0 - y);
                    }
                }
            }
            Op::Concat(inputs) => {
                let widths: Vec<usize> = inputs
                    .iter()
                    .map(|id| *nodes[id.0].value.shape().last().expect("rank 4"))
                    .collect();
                let total: usize = widths.iter().sum();
                let pixels = g.len() / total;
                let mut offset = 0;
                for (&id, &c) in inputs.iter().zip(&widths) {
                    if let Some(d) = grad_buf(nodes, grads, id) {
                        for p in 0..pixels {
                            for ch in 0..c {
                                d[p * c + ch] += g[p * total + offset + ch];
                            }
                        }
                    }
                    offset += c;
                }
            }
            &Op::Sum(a) => {
                if let Some(d) = grad_buf(nodes, grads, a) {
                    for dv in d.iter_mut() {
                        *dv += g[0];
                    }
                }
            }
            Op::SoftmaxCrossEntropy { logits, targets, probs } => {
                let t = nodes[targets.0].value.data();
                let pixels = {
                    let s = nodes[logits.0].value.shape();
                    s[0] * s[1] * s[2]
                };
                let scale = g[0] / pixels as f64;
                if let Some(d) = grad_buf(nodes, grads, *logits) {
                    for ((dv, &p), &tv) in d.iter_mut().zip(probs).zip(t) {
                        *dv += (p - tv) * scale;
                    }
                }
            }
        }
    }
}

/// Calls `f(iy, ix)` for the in-bounds input positions of output `(oy, ox)`'s
/// window, in row-major order.
#[allow(clippy::too_many_arguments)]
#[inline(always)]
fn for_window(
    oy: usize,
    ox: usize,
    window: usize,
    stride: usize,
    (pt, pl): (usize, usize),
    h: usize,
    w: usize,
    mut f: impl FnMut(usize, usize),
) {
    for ky in 0..window {
        let Some(iy) = (oy * stride + ky).checked_sub(pt).filter(|&v| v < h) else {
            continue;
        };
        for kx in 0..window {
            let Some(ix) = (ox * stride + kx).checked_sub(pl).filter(|&v| v < w) else {
                continue;
            };
            f(iy, ix);
        }
    }
}

/// Flat input index of each max-pool output: the first window element, in
/// row-major order, equal to the pooled maximum.
fn pool_argmax(nodes: &[Node], node: &Node) -> Vec<usize> {
    let &Op::MaxPool {
        input,
        window,
        stride,
        pad,
    } = &node.op
    else {
        unreachable!("called on a max-pool node");
    };
    let xd = nodes[input.0].value.data();
    let [n, h, w, c] = nodes[input.0].value.dims4().expect("checked in forward");
    let [_, oh, ow, _] = node.value.dims4().expect("checked in forward");
    let out = node.value.data();
    let mut argmax = vec![usize::MAX; out.len()];
    for b in 0..n {
        for oy in 0..oh {
            for ox in 0..ow {
                let o = ((b * oh + oy) * ow + ox) * c;
                let mut first = None;
                for_window(oy, ox, window, stride, pad, h, w, |iy, ix| {
                    let base = ((b * h + iy) * w + ix) * c;
                    first.get_or_insert(base);
                    for ch in 0..c {
                        if argmax[o + ch] == usize::MAX && xd[base + ch] == out[o + ch] {
                            argmax[o + ch] = base + ch;
                        }
                    }
                });
                // Only reachable with NaN inputs.
                let first = first.expect("windows overlap the input");
                for ch in 0..c {
                    if argmax[o + ch] == usize::MAX {
                        argmax[o + ch] = first + ch;
                    }
                }
            }
        }
    }
    argmax
}

/// `out += op(a) · op(b)` for row-major operands, where `op` optionally
/// transposes; `op(a)` is m×k and `op(b)` is k×n.
#[allow(clippy::too_many_arguments)]
fn gemm(m: usize, k: usize, n: usize, a: &[f64], ta: bool, b: &[f64], tb: bool, out: &mut [f64]) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(out.len(), m * n);
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    #[allow(unsafe_code)]
    // SAFETY: the strides describe exactly the row-major buffers whose
    // lengths are asserted above.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            1.0,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

fn grad_buf<'a>(nodes: &[Node], grads: &'a mut [Option<Vec<f64>>], id: NodeId) -> Option<&'a mut Vec<f64>> {
    let node = &nodes[id.0];
    if !node.requires_grad {
        return None;
    }
    Some(grads[id.0].get_or_insert_with(|| vec![0.0; node.value.len()]))
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + libm::exp(-v))
    } else {
        let e = libm::exp(v);
        e / (1.0 + e)
    }
}
