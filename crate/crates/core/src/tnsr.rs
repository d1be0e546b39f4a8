//! `TNSR1` portable tensor encoding.
//!
//! Layout: magic `TNSR`, version byte `0x01`, dtype byte (0 = f32,
//! 1 = f64), rank byte, `rank` little-endian `u32` dims, then the row-major
//! little-endian payload.

use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"TNSR";
pub const VERSION: u8 = 0x01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum DType {
    F32 = 0,
    F64 = 1,
}

impl DType {
    fn width(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }
}

pub fn encode(tensor: &Tensor, dtype: DType) -> Result<Vec<u8>> {
    let rank = tensor.shape().len();
    if rank > u8::MAX as usize {
        bail!(Format, "rank {} does not fit in a byte", rank);
    }
    let mut out = Vec::with_capacity(7 + 4 * rank + dtype.width() * tensor.len());
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(dtype as u8);
    out.push(rank as u8);
    for &d in tensor.shape() {
        let Ok(d) = u32::try_from(d) else {
            bail!(Format, "dimension {} does not fit in u32", d);
        };
        out.extend_from_slice(&d.to_le_bytes());
    }
    match dtype {
        DType::F64 => tensor
            .data()
            .iter()
            .for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
        DType::F32 => tensor
            .data()
            .iter()
            .for_each(|&v| out.extend_from_slice(&(v as f32).to_le_bytes())),
    }
    Ok(out)
}

/// Decodes one tensor from the front of `bytes`, returning it with its dtype
/// and the number of bytes consumed. `f32` payloads are widened to `f64`.
pub fn decode_prefix(bytes: &[u8]) -> Result<(Tensor, DType, usize)> {
    if bytes.len() < 7 {
        bail!(Format, "truncated TNSR header");
    }
    if &bytes[..4] != MAGIC {
        bail!(Format, "bad magic {:?}, expected TNSR", &bytes[..4]);
    }
    if bytes[4] != VERSION {
        bail!(Format, "unsupported TNSR version {}", bytes[4]);
    }
    let dtype = match bytes[5] {
        0 => DType::F32,
        1 => DType::F64,
        other => bail!(Format, "unknown dtype code {}", other),
    };
    let rank = bytes[6] as usize;
    let header = 7 + 4 * rank;
    if bytes.len() < header {
        bail!(Format, "truncated TNSR dims");
    }
    let shape: Vec<usize> = bytes[7..header]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let count = shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .unwrap_or(usize::MAX);
    let payload = count.saturating_mul(dtype.width());
    if bytes.len() - header < payload {
        bail!(Format, "truncated TNSR payload: need {} bytes", payload);
    }
    let body = &bytes[header..header + payload];
    let data: Vec<f64> = match dtype {
        DType::F64 => body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect(),
        DType::F32 => body
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")) as f64)
            .collect(),
    };
    Ok((Tensor::new(shape, data)?, dtype, header + payload))
}

/// Decodes a buffer holding exactly one tensor.
pub fn decode(bytes: &[u8]) -> Result<Tensor> {
    let (t, _, used) = decode_prefix(bytes)?;
    if used != bytes.len() {
        bail!(Format, "{} trailing bytes after tensor", bytes.len() - used);
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn header_layout() {
        let t = Tensor::new(vec![2, 1], vec![1.0, -2.5]).unwrap();
        let bytes = encode(&t, DType::F64).unwrap();
        assert_eq!(&bytes[..7], &[b'T', b'N', b'S', b'R', 1, 1, 2]);
        assert_eq!(&bytes[7..15], &[2, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(bytes.len(), 15 + 16);
        assert_eq!(decode(&bytes).unwrap(), t);
    }

    #[test]
    fn f32_payload_widens() {
        let t = Tensor::new(vec![3], vec![0.5, 1.25, -8.0]).unwrap();
        let bytes = encode(&t, DType::F32).unwrap();
        assert_eq!(bytes[5], 0);
        assert_eq!(decode(&bytes).unwrap(), t);
    }

    #[test]
    fn rejects_corruption() {
        let t = Tensor::ones(&[2, 2]);
        let mut bytes = encode(&t, DType::F64).unwrap();
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        bytes[0] = b'X';
        assert!(decode(&bytes).is_err());
        let mut bytes = encode(&t, DType::F64).unwrap();
        bytes[4] = 2;
        assert!(decode(&bytes).is_err());
    }
}
