//! Checkpoint files: `SHNC`, a version byte, a little-endian u32 header
//! length, a JSON header (config, parameter names, optimizer scalars, Haar
//! kernels), then TNSR1 f64 blobs for every parameter followed by the Adam
//! first and second moments when present.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sharpnet_core::haar::HaarKernel;
use sharpnet_core::model::{SharpNet, SharpNetConfig};
use sharpnet_core::optim::{AdamHyper, AdamState};
use sharpnet_core::tnsr::{self, DType};

use crate::error::{CliError, Result};
use crate::files::{read_bytes, write_bytes};

pub const MAGIC: &[u8; 4] = b"SHNC";
pub const VERSION: u8 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    config: SharpNetConfig,
    params: Vec<String>,
    adam: Option<AdamHeader>,
    haar_kernels: Vec<HaarKernel>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AdamHeader {
    hyper: AdamHyper,
    t: u64,
}

/// A network plus the Haar kernels its injected bank is built from.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub net: SharpNet,
    pub haar_kernels: Vec<HaarKernel>,
}

pub fn encode(ckpt: &Checkpoint) -> Result<Vec<u8>> {
    let net = &ckpt.net;
    let header = Header {
        config: net.config().clone(),
        params: net.params().names().to_vec(),
        adam: net.adam().map(|a| AdamHeader { hyper: a.hyper, t: a.t }),
        haar_kernels: ckpt.haar_kernels.clone(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| CliError::Data(e.to_string()))?;
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    let mut blobs: Vec<_> = net.params().tensors().iter().collect();
    if let Some(adam) = net.adam() {
        blobs.extend(&adam.m);
        blobs.extend(&adam.v);
    }
    for t in blobs {
        out.extend_from_slice(&tnsr::encode(t, DType::F64)?);
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint> {
    let corrupt = |what: &str| CliError::Data(format!("corrupt checkpoint: {what}"));
    if bytes.len() < 9 || &bytes[..4] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    if bytes[4] != VERSION {
        return Err(CliError::Data(format!("unsupported checkpoint version {}", bytes[4])));
    }
    let len = u32::from_le_bytes(bytes[5..9].try_into().expect("four bytes")) as usize;
    let json = bytes.get(9..9 + len).ok_or_else(|| corrupt("truncated header"))?;
    let header: Header = serde_json::from_slice(json).map_err(|e| corrupt(&e.to_string()))?;
    let mut rest = &bytes[9 + len..];
    let mut next = || -> Result<sharpnet_core::Tensor> {
        let (t, _, used) = tnsr::decode_prefix(rest).map_err(|e| corrupt(&e.to_string()))?;
        rest = &rest[used..];
        Ok(t)
    };
    let mut params = Vec::with_capacity(header.params.len());
    for name in &header.params {
        params.push((name.clone(), next()?));
    }
    let adam = match header.adam {
        Some(AdamHeader { hyper, t }) => {
            let n = params.len();
            let m = (0..n).map(|_| next()).collect::<Result<Vec<_>>>()?;
            let v = (0..n).map(|_| next()).collect::<Result<Vec<_>>>()?;
            Some(AdamState { hyper, t, m, v })
        }
        None => None,
    };
    if !rest.is_empty() {
        return Err(corrupt("trailing bytes"));
    }
    let net = SharpNet::from_parts(header.config, params, adam).map_err(|e| corrupt(&e.to_string()))?;
    Ok(Checkpoint {
        net,
        haar_kernels: header.haar_kernels,
    })
}

pub fn save(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    write_bytes(path, &encode(ckpt)?)
}

pub fn load(path: &Path) -> Result<Checkpoint> {
    decode(&read_bytes(path)?).map_err(|e| match e {
        CliError::Data(m) => CliError::Data(format!("{}: {}", path.display(), m)),
        other => other,
    })
}
