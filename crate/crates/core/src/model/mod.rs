//! The segmentation network: an inception-style bottom-up pathway with an
//! optional Haar feature gate, a fixed-width top-down pyramid, and one
//! classifier shared across pyramid levels.

mod config;
mod layers;
mod net;

pub use config::{GateActivation, InjectionConfig, SharpNetConfig};
pub use layers::{DsConv, Inception, InjectionGate, ParamId, ParamStore, Pointwise};
pub use net::{Forward, Layout, SharpNet};
