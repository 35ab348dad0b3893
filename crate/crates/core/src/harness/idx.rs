//! Reader for the IDX container used by MNIST-style datasets: a big-endian
//! magic `0x0000TTDD` (type code `TT`, `DD` dimensions), `DD` big-endian u32
//! sizes, then the payload. Only the unsigned-byte type (`0x08`) is accepted.

use std::path::Path;

use super::{HarnessError, HarnessResult};

pub const MAGIC_LABELS: u32 = 0x0000_0801;
pub const MAGIC_IMAGES: u32 = 0x0000_0803;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxArray {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

impl IdxArray {
    /// Number of items along the first axis.
    pub fn len(&self) -> usize {
        self.dims.first().copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Size of one item, the product of the trailing dimensions.
    pub fn item_size(&self) -> usize {
        self.dims.iter().skip(1).product()
    }
}

/// Parses an in-memory IDX file. Errors are plain messages; [`read_idx`]
/// attaches the path.
pub fn parse_idx(bytes: &[u8], expected_magic: u32) -> Result<IdxArray, String> {
    if bytes.len() < 4 {
        return Err(format!("header truncated: expected at least 4 bytes, found {}", bytes.len()));
    }
    let magic = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]);
    if magic != expected_magic {
        return Err(format!("bad magic number 0x{magic:08x}, expected 0x{expected_magic:08x}"));
    }
    let ndims = (magic & 0xff) as usize;
    let header = 4 + 4 * ndims;
    if bytes.len() < header {
        return Err(format!(
            "header truncated: expected {header} bytes for {ndims} dimensions, found {}",
            bytes.len()
        ));
    }
    let dims: Vec<usize> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]) as usize)
        .collect();
    let payload = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| format!("dimensions {dims:?} overflow"))?;
    let actual = bytes.len() - header;
    if actual != payload {
        let what = if actual < payload { "truncated" } else { "oversized" };
        return Err(format!(
            "payload {what}: dimensions {dims:?} need {payload} bytes, found {actual}"
        ));
    }
    Ok(IdxArray {
        dims,
        data: bytes[header..].to_vec(),
    })
}

pub fn read_idx(path: &Path, expected_magic: u32) -> HarnessResult<IdxArray> {
    let bytes = std::fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    parse_idx(&bytes, expected_magic).map_err(|message| HarnessError::Format {
        path: path.to_path_buf(),
        message,
    })
}

/// Serializes an unsigned-byte IDX array. Used to build fixtures.
pub fn encode_idx(dims: &[usize], data: &[u8]) -> Vec<u8> {
    let mut out = vec![0, 0, 0x08, dims.len() as u8];
    for &d in dims {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend_from_slice(data);
    out
}
