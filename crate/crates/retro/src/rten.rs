//! The `RTEN` binary tensor format.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "RTEN"
//! 4       1     version (1)
//! 5       1     dtype   (0 = u8, 1 = f32)
//! 6       1     layout  (0 = TCHW, 1 = CTHW)
//! 7       16    T, C, H, W as little-endian u32, always in this order
//! 23      ...   payload in declared layout order; f32 little-endian
//! ```

use std::path::Path;

use retro_core::tensor::{Dims, FrameTensor, Layout, Payload, TensorError};
use thiserror::Error;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"RTEN";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 23;

#[derive(Debug, Error)]
pub enum RtenError {
    #[error("not an RTEN file (bad magic)")]
    BadMagic,
    #[error("unsupported RTEN version {0}")]
    Version(u8),
    #[error("unknown dtype code {0}")]
    DType(u8),
    #[error("unknown layout code {0}")]
    Layout(u8),
    #[error("truncated RTEN data: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("{0} unexpected trailing bytes after the payload")]
    Trailing(usize),
    #[error("invalid tensor: {0}")]
    Tensor(#[from] TensorError),
}

pub fn encode(tensor: &FrameTensor) -> Vec<u8> {
    let d = tensor.dims();
    let payload = tensor.payload();
    let elem = match payload {
        Payload::U8(_) => 1,
        Payload::F32(_) => 4,
    };
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len() * elem);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(match payload {
        Payload::U8(_) => 0,
        Payload::F32(_) => 1,
    });
    out.push(match tensor.layout() {
        Layout::Tchw => 0,
        Layout::Cthw => 1,
    });
    for dim in [d.frames, d.channels, d.height, d.width] {
        let dim = u32::try_from(dim).expect("tensor dimension exceeds u32");
        out.extend_from_slice(&dim.to_le_bytes());
    }
    match payload {
        Payload::U8(v) => out.extend_from_slice(v),
        Payload::F32(v) => v
            .iter()
            .for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<FrameTensor, RtenError> {
    if bytes.len() < HEADER_LEN {
        if bytes.len() >= 4 && &bytes[..4] != MAGIC {
            return Err(RtenError::BadMagic);
        }
        return Err(RtenError::Truncated {
            expected: HEADER_LEN,
            actual: bytes.len(),
        });
    }
    if &bytes[..4] != MAGIC {
        return Err(RtenError::BadMagic);
    }
    if bytes[4] != VERSION {
        return Err(RtenError::Version(bytes[4]));
    }
    let elem = match bytes[5] {
        0 => 1,
        1 => 4,
        other => return Err(RtenError::DType(other)),
    };
    let layout = match bytes[6] {
        0 => Layout::Tchw,
        1 => Layout::Cthw,
        other => return Err(RtenError::Layout(other)),
    };
    let dim = |i: usize| {
        let o = 7 + 4 * i;
        u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize
    };
    let dims = Dims::new(dim(0), dim(1), dim(2), dim(3));
    if [dims.frames, dims.channels, dims.height, dims.width].contains(&0) {
        return Err(TensorError::ZeroDimension(dims).into());
    }
    let count = dims.element_count().ok_or(TensorError::Overflow(dims))?;
    let expected = count
        .checked_mul(elem)
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or(TensorError::Overflow(dims))?;
    let body = &bytes[HEADER_LEN..];
    if bytes.len() < expected {
        return Err(RtenError::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(RtenError::Trailing(bytes.len() - expected));
    }
    let payload = if elem == 1 {
        Payload::U8(body.to_vec())
    } else {
        Payload::F32(
            body.chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        )
    };
    Ok(FrameTensor::new(dims, layout, payload)?)
}

pub fn read(path: &Path) -> Result<FrameTensor> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode(&bytes)?)
}

pub fn write(path: &Path, tensor: &FrameTensor) -> Result<usize> {
    let bytes = encode(tensor);
    std::fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
    Ok(bytes.len())
}
