//! Model persistence: a small versioned binary container holding layer
//! shapes and raw little-endian f64 parameter arrays. Loading a saved model
//! reproduces it bit for bit.

use std::fs;
use std::path::Path;

use super::conv::ConvLayer;
use super::model::{CnnLayer, CnnModel};
use crate::error::{Result, SimError};

const MAGIC: &[u8; 4] = b"HLMD";
pub const MODEL_FORMAT_VERSION: u32 = 1;

pub fn model_to_bytes(model: &CnnModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(model.layers.len() as u32).to_le_bytes());
    for layer in &model.layers {
        let c = &layer.conv;
        out.extend_from_slice(&(c.kernel_size as u32).to_le_bytes());
        out.extend_from_slice(&(c.in_channels as u32).to_le_bytes());
        out.extend_from_slice(&(c.out_channels as u32).to_le_bytes());
        out.extend_from_slice(&(c.padding as u32).to_le_bytes());
        out.push(u8::from(layer.relu));
        out.extend_from_slice(&(c.weights.len() as u64).to_le_bytes());
        for w in &c.weights {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.extend_from_slice(&(c.bias.len() as u64).to_le_bytes());
        for b in &c.bias {
            out.extend_from_slice(&b.to_le_bytes());
        }
    }
    out
}

pub(crate) struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        ByteReader { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(SimError::FileFormat("truncated file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f64_vec(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n * 8)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn magic(&mut self, expect: &[u8; 4], what: &str) -> Result<()> {
        if self.take(4)? != expect {
            return Err(SimError::FileFormat(format!("not a {what} file")));
        }
        Ok(())
    }

    pub fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<CnnModel> {
    let mut r = ByteReader::new(bytes);
    r.magic(MAGIC, "model")?;
    let version = r.u32()?;
    if version != MODEL_FORMAT_VERSION {
        return Err(SimError::FileFormat(format!(
            "model format version {version}, expected {MODEL_FORMAT_VERSION}"
        )));
    }
    let n_layers = r.u32()? as usize;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let kernel_size = r.u32()? as usize;
        let in_channels = r.u32()? as usize;
        let out_channels = r.u32()? as usize;
        let padding = r.u32()? as usize;
        let relu = r.u8()? != 0;
        let wlen = r.u64()? as usize;
        if wlen != kernel_size * kernel_size * in_channels * out_channels {
            return Err(SimError::FileFormat("weight count disagrees with dims".into()));
        }
        let weights = r.f64_vec(wlen)?;
        let blen = r.u64()? as usize;
        if blen != out_channels {
            return Err(SimError::FileFormat("bias count disagrees with dims".into()));
        }
        let bias = r.f64_vec(blen)?;
        layers.push(CnnLayer {
            conv: ConvLayer {
                kernel_size,
                in_channels,
                out_channels,
                padding,
                weights,
                bias,
            },
            relu,
        });
    }
    if !r.done() {
        return Err(SimError::FileFormat("trailing bytes after model".into()));
    }
    Ok(CnnModel { layers })
}

pub fn save_model(model: &CnnModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, model_to_bytes(model))?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<CnnModel> {
    let bytes = fs::read(path)?;
    model_from_bytes(&bytes)
}
