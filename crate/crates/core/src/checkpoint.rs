//! Binary checkpoint encoding of a [`NetworkState`].
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic    8 bytes  "LGELUCKP"
//! version  u32      FORMAT_VERSION
//! act      u8       0 = lambda_gelu, 1 = gelu, 2 = relu
//! layers   u32
//! per layer:
//!   out u32, in u32
//!   weights  out*in f64 (row-major), bias out f64
//!   hardness u8 (0 = none, 1 = present)
//!   if present: s f64, t f64, frozen u8, scheduled u8, scheduled value f64
//! ```
//!
//! Floats are stored as raw IEEE-754 bits, so a save/load cycle is bit-exact.

use crate::activation::ActivationKind;
use crate::error::{Error, Result};
use crate::network::{LayerState, Matrix, NetworkState};
use crate::reparam::HardnessParam;

pub const MAGIC: &[u8; 8] = b"LGELUCKP";
pub const FORMAT_VERSION: u32 = 1;

pub(crate) fn encode(net: &NetworkState) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(match net.activation {
        ActivationKind::LambdaGelu => 0,
        ActivationKind::Gelu => 1,
        ActivationKind::Relu => 2,
    });
    out.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
    for layer in net.layers() {
        out.extend_from_slice(&(layer.out_dim() as u32).to_le_bytes());
        out.extend_from_slice(&(layer.in_dim() as u32).to_le_bytes());
        for v in layer.weights.data.iter().chain(&layer.bias) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        match &layer.hardness {
            None => out.push(0),
            Some(p) => {
                out.push(1);
                out.extend_from_slice(&p.s().to_le_bytes());
                out.extend_from_slice(&p.t().to_le_bytes());
                out.push(p.is_frozen() as u8);
                out.push(p.scheduled().is_some() as u8);
                out.extend_from_slice(&p.scheduled().unwrap_or(0.0).to_le_bytes());
            }
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Checkpoint(format!(
                "truncated: need {n} bytes at offset {}, {} remain",
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn flag(&mut self, what: &str) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(Error::Checkpoint(format!("bad {what} flag {other}"))),
        }
    }
}

pub(crate) fn decode(bytes: &[u8]) -> Result<NetworkState> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {version}, expected {FORMAT_VERSION}"
        )));
    }
    let activation = match r.u8()? {
        0 => ActivationKind::LambdaGelu,
        1 => ActivationKind::Gelu,
        2 => ActivationKind::Relu,
        other => return Err(Error::Checkpoint(format!("unknown activation tag {other}"))),
    };
    let count = r.u32()? as usize;
    let mut layers = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let weights = (0..rows * cols).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let bias = (0..rows).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let hardness = if r.flag("hardness")? {
            let s = r.f64()?;
            let t = r.f64()?;
            let frozen = r.flag("frozen")?;
            let has_sched = r.flag("schedule")?;
            let sched = r.f64()?;
            if !(t > 0.0) {
                return Err(Error::Checkpoint(format!("temperature {t} is not positive")));
            }
            Some(HardnessParam::from_raw(s, t, frozen, has_sched.then_some(sched)))
        } else {
            None
        };
        layers.push(LayerState {
            weights: Matrix::from_vec(rows, cols, weights)?,
            bias,
            hardness,
        });
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after last layer",
            bytes.len() - r.pos
        )));
    }
    NetworkState::from_layers(layers, activation)
}
