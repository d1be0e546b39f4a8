use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{check_dims, SharpNetConfig};
use super::layers::{DsConv, Inception, InjectionGate, ParamStore, Pointwise};
use crate::data::{argmax_classes, ClassMap};
use crate::error::{bail, Result};
use crate::graph::{Graph, NodeId};
use crate::optim::{AdamHyper, AdamState};
use crate::tensor::Tensor;

/// Layer layout over the parameter store.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub bottom_up: Vec<Inception>,
    pub gate: Option<InjectionGate>,
    pub lateral: Vec<Pointwise>,
    pub smooth: Vec<DsConv>,
    pub classifier: Pointwise,
}

/// Graph nodes produced by one forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    pub params: Vec<NodeId>,
    pub bottom_up: Vec<NodeId>,
    pub pyramid: Vec<NodeId>,
    pub logits: NodeId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SharpNet {
    config: SharpNetConfig,
    store: ParamStore,
    layout: Layout,
    adam: Option<AdamState>,
}

impl SharpNet {
    /// Builds the network with parameters drawn from `config.seed`.
    pub fn new(config: SharpNetConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let p = config.pyramid_channels;
        let mut bottom_up = Vec::with_capacity(config.levels);
        let mut gate = None;
        let mut cin = config.input_dims[2];
        for (i, &cout) in config.bottom_up_channels.iter().enumerate() {
            let level = i + 1;
            bottom_up.push(Inception::new(
                &mut store,
                &mut rng,
                &format!("bottom_up.{level}"),
                cin,
                cout,
            )?);
            if config.injection.enabled && config.injection.level == level {
                gate = Some(InjectionGate::new(
                    &mut store,
                    &mut rng,
                    "injection_gate",
                    config.injection.bank_channels,
                    cout,
                )?);
            }
            cin = cout;
        }
        let mut lateral = Vec::with_capacity(config.levels);
        let mut smooth = Vec::with_capacity(config.levels);
        for (i, &c) in config.bottom_up_channels.iter().enumerate() {
            let level = i + 1;
            lateral.push(Pointwise::new(
                &mut store,
                &mut rng,
                &format!("top_down.lateral.{level}"),
                c,
                p,
            ));
            smooth.push(DsConv::new(
                &mut store,
                &mut rng,
                &format!("top_down.smooth.{level}"),
                p,
                p,
                3,
            )?);
        }
        let classifier = Pointwise::new(&mut store, &mut rng, "classifier", p, config.num_classes);
        Ok(Self {
            config,
            store,
            layout: Layout {
                bottom_up,
                gate,
                lateral,
                smooth,
                classifier,
            },
            adam: None,
        })
    }

    /// Rebuilds a network from saved parameters. Names and shapes must match
    /// the layout `config` produces.
    pub fn from_parts(config: SharpNetConfig, params: Vec<(String, Tensor)>, adam: Option<AdamState>) -> Result<Self> {
        let mut net = Self::new(config)?;
        if params.len() != net.store.len() {
            bail!(
                Format,
                "{} saved parameters, layout has {}",
                params.len(),
                net.store.len()
            );
        }
        let mut tensors = Vec::with_capacity(params.len());
        for ((name, tensor), expected) in params.into_iter().zip(net.store.names()) {
            if &name != expected {
                bail!(Format, "parameter {} found where {} expected", name, expected);
            }
            tensors.push(tensor);
        }
        net.store.replace_tensors(tensors)?;
        if let Some(state) = &adam {
            let ok = state.m.len() == net.store.len()
                && state.v.len() == net.store.len()
                && state
                    .m
                    .iter()
                    .zip(&state.v)
                    .zip(net.store.tensors())
                    .all(|((m, v), p)| m.shape() == p.shape() && v.shape() == p.shape());
            if !ok {
                bail!(Format, "optimizer state does not match the parameters");
            }
        }
        net.adam = adam;
        Ok(net)
    }

    pub fn config(&self) -> &SharpNetConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn adam(&self) -> Option<&AdamState> {
        self.adam.as_ref()
    }

    /// Attaches fresh optimizer state, replacing any existing one.
    pub fn enable_adam(&mut self, hyper: AdamHyper) {
        self.adam = Some(AdamState::new(hyper, self.store.tensors()));
    }

    pub fn count_parameters(&self) -> usize {
        self.store.element_count()
    }

    /// Registers the parameters in `g` and returns their node ids.
    pub fn bind(&self, g: &mut Graph, trainable: bool) -> Vec<NodeId> {
        self.store.register(g, trainable)
    }

    /// Level outputs C1..C_L. Each level is an inception block followed by
    /// 2×2 max-pooling; the gate multiplies the configured level's output.
    pub fn bottom_up_forward(
        &self,
        g: &mut Graph,
        params: &[NodeId],
        image: NodeId,
        bank: Option<NodeId>,
    ) -> Result<Vec<NodeId>> {
        let shape = g.value(image).shape().to_vec();
        check_dims(&self.config, &shape, "image", self.config.input_dims[2], 0)?;
        let bank = match (&self.layout.gate, bank) {
            (Some(_), None) => bail!(Contract, "injection is enabled but no feature bank was supplied"),
            (Some(_), Some(b)) => {
                let bs = g.value(b).shape().to_vec();
                check_dims(
                    &self.config,
                    &bs,
                    "feature bank",
                    self.config.injection.bank_channels,
                    self.config.injection.level,
                )?;
                if bs[0] != shape[0] {
                    bail!(InvalidShape, "bank batch {} for image batch {}", bs[0], shape[0]);
                }
                Some(b)
            }
            (None, _) => None,
        };
        let mut x = image;
        let mut outputs = Vec::with_capacity(self.config.levels);
        for (i, block) in self.layout.bottom_up.iter().enumerate() {
            let y = block.forward(g, params, x)?;
            let mut y = g.max_pool(y, 2, 2, crate::tensor::Padding::Valid)?;
            if i + 1 == self.config.injection.level {
                if let (Some(gate), Some(b)) = (&self.layout.gate, bank) {
                    y = gate.forward(g, params, y, b)?;
                }
            }
            outputs.push(y);
            x = y;
        }
        Ok(outputs)
    }

    /// Pyramid P1..P_L: lateral 1×1 projections to the pyramid width, fused
    /// top-down by nearest upsampling and addition, each smoothed by a 3×3
    /// depth-wise separable convolution.
    pub fn top_down_forward(&self, g: &mut Graph, params: &[NodeId], levels: &[NodeId]) -> Result<Vec<NodeId>> {
        if levels.len() != self.config.levels {
            bail!(
                InvalidShape,
                "{} bottom-up outputs for {} levels",
                levels.len(),
                self.config.levels
            );
        }
        let mut pyramid = Vec::with_capacity(levels.len());
        let mut above: Option<NodeId> = None;
        for i in (0..levels.len()).rev() {
            let lat = self.layout.lateral[i].forward(g, params, levels[i])?;
            let merged = match above {
                Some(p) => {
                    let up = g.upsample2x(p)?;
                    g.add(up, lat)?
                }
                None => lat,
            };
            let p = self.layout.smooth[i].forward(g, params, merged)?;
            pyramid.push(p);
            above = Some(p);
        }
        pyramid.reverse();
        Ok(pyramid)
    }

    /// Shared classifier on every pyramid level; level `i` logits are
    /// upsampled `i` times to input resolution and the levels averaged.
    pub fn classifier_head(&self, g: &mut Graph, params: &[NodeId], pyramid: &[NodeId]) -> Result<NodeId> {
        if pyramid.is_empty() {
            bail!(InvalidShape, "classifier needs at least one pyramid level");
        }
        let [_, h, w, _] = g.value(pyramid[0]).dims4()?;
        let (ih, iw) = (self.config.input_dims[0], self.config.input_dims[1]);
        let mut total: Option<NodeId> = None;
        for &p in pyramid {
            let mut z = self.layout.classifier.forward(g, params, p)?;
            loop {
                let [_, zh, zw, _] = g.value(z).dims4()?;
                if zh >= ih && zw >= iw {
                    break;
                }
                z = g.upsample2x(z)?;
            }
            let [_, zh, zw, _] = g.value(z).dims4()?;
            if (zh, zw) != (ih, iw) {
                bail!(InvalidShape, "level of {}×{} does not upsample to {}×{}", h, w, ih, iw);
            }
            total = Some(match total {
                Some(t) => g.add(t, z)?,
                None => z,
            });
        }
        let total = total.expect("non-empty pyramid");
        g.scale(total, 1.0 / pyramid.len() as f64)
    }

    /// Full forward pass on an N×H×W×C image tensor and optional N×h×w×B
    /// feature bank at the injection level's resolution.
    pub fn forward_graph(
        &self,
        g: &mut Graph,
        image: NodeId,
        bank: Option<NodeId>,
        trainable: bool,
    ) -> Result<Forward> {
        let params = self.bind(g, trainable);
        let bottom_up = self.bottom_up_forward(g, &params, image, bank)?;
        let pyramid = self.top_down_forward(g, &params, &bottom_up)?;
        let logits = self.classifier_head(g, &params, &pyramid)?;
        Ok(Forward {
            params,
            bottom_up,
            pyramid,
            logits,
        })
    }

    /// Logits N×H×W×K.
    pub fn forward(&self, image: &Tensor, bank: Option<&Tensor>) -> Result<Tensor> {
        let mut g = Graph::new();
        let x = g.constant(image.clone());
        let b = bank.map(|b| g.constant(b.clone()));
        let out = self.forward_graph(&mut g, x, b, false)?;
        Ok(g.value(out.logits).clone())
    }

    /// Per-pixel argmax of the logits; ties go to the lowest class index.
    pub fn predict(&self, image: &Tensor, bank: Option<&Tensor>) -> Result<Vec<ClassMap>> {
        argmax_classes(&self.forward(image, bank)?)
    }

    /// Builds the forward graph and the mean cross-entropy node against
    /// one-hot `targets`.
    pub fn loss_graph(
        &self,
        image: &Tensor,
        bank: Option<&Tensor>,
        targets: &Tensor,
        trainable: bool,
    ) -> Result<(Graph, Forward, NodeId)> {
        let mut g = Graph::new();
        let x = g.constant(image.clone());
        let b = bank.map(|b| g.constant(b.clone()));
        let out = self.forward_graph(&mut g, x, b, trainable)?;
        let t = g.constant(targets.clone());
        let loss = g.softmax_cross_entropy(out.logits, t)?;
        Ok((g, out, loss))
    }

    /// Mean cross-entropy and its gradient with respect to every parameter,
    /// in store order.
    pub fn loss_and_grads(
        &self,
        image: &Tensor,
        bank: Option<&Tensor>,
        targets: &Tensor,
    ) -> Result<(f64, Vec<Tensor>)> {
        let (mut g, out, loss) = self.loss_graph(image, bank, targets, true)?;
        g.backward(loss)?;
        let value = g.value(loss).data()[0];
        let grads = out
            .params
            .iter()
            .zip(self.store.tensors())
            .map(|(&id, p)| g.grad(id).unwrap_or_else(|| Tensor::zeros(p.shape())))
            .collect();
        Ok((value, grads))
    }

    pub fn loss(&self, image: &Tensor, bank: Option<&Tensor>, targets: &Tensor) -> Result<f64> {
        let (g, _, loss) = self.loss_graph(image, bank, targets, false)?;
        Ok(g.value(loss).data()[0])
    }

    /// One Adam update on a batch; returns the loss before the update.
    /// Creates default optimizer state on first use.
    pub fn train_step(&mut self, image: &Tensor, bank: Option<&Tensor>, targets: &Tensor) -> Result<f64> {
        let (loss, grads) = self.loss_and_grads(image, bank, targets)?;
        if !loss.is_finite() {
            bail!(Numeric, "non-finite loss {}", loss);
        }
        if self.adam.is_none() {
            self.enable_adam(AdamHyper::default());
        }
        let adam = self.adam.as_mut().expect("optimizer state present");
        adam.step(self.store.tensors_mut(), &grads)?;
        Ok(loss)
    }
}
