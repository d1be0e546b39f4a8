#![no_std]
#![deny(unsafe_code)]

//! Core of the SHARP-Net segmentation toolkit.
//!
//! Everything in this crate is pure computation over `alloc` containers:
//! a small reverse-mode autodiff engine specialised to the operations the
//! pyramid network needs, the Adam optimizer, integral-image Haar-like
//! features with PSNR-based selection, the network itself, segmentation
//! metrics, dataset helpers and the `TNSR1` tensor codec. File and process
//! IO live in the `sharpnet` companion crate.

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod data;
pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod haar;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod tensor;
pub mod tnsr;

pub use error::{Error, Result};
pub use graph::{Graph, NodeId};
pub use optim::AdamState;
pub use tensor::{Padding, Tensor};
