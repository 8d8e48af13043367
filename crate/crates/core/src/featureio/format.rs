//! Binary feature tensor files.
//!
//! Layout (all integers u32 little-endian):
//! - magic `F0FT`
//! - version = 1
//! - rank (1 or 2)
//! - dims, row-major for rank 2
//! - payload: IEEE-754 binary32 little-endian, row-major

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const FEATURE_MAGIC: &[u8; 4] = b"F0FT";
pub const FEATURE_VERSION: u32 = 1;

/// A decoded feature file: shape plus flat row-major payload.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl FeatureTensor {
    pub fn vector(data: Vec<f32>) -> Self {
        Self {
            dims: vec![data.len()],
            data,
        }
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f32>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix payload size");
        Self {
            dims: vec![rows, cols],
            data,
        }
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }
}

pub fn encode_tensor(tensor: &FeatureTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 4 * tensor.dims.len() + 4 * tensor.data.len());
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&FEATURE_VERSION.to_le_bytes());
    out.extend_from_slice(&(tensor.dims.len() as u32).to_le_bytes());
    for &d in &tensor.dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in &tensor.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Decodes a feature tensor. `label` names the source in error messages.
/// Non-finite payload values are rejected.
pub fn decode_tensor(bytes: &[u8], label: &str) -> Result<FeatureTensor> {
    let mut cursor = ByteCursor::new(bytes, label);
    let magic = cursor.take(4)?;
    if magic != FEATURE_MAGIC {
        return Err(Error::BadMagic(label.to_string(), "F0FT"));
    }
    let version = cursor.u32()?;
    if version != FEATURE_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let rank = cursor.u32()? as usize;
    if rank != 1 && rank != 2 {
        return Err(Error::DimensionMismatch(format!(
            "{label}: rank {rank} (expected 1 or 2)"
        )));
    }
    let mut dims = Vec::with_capacity(rank);
    for _ in 0..rank {
        dims.push(cursor.u32()? as usize);
    }
    let count: usize = dims.iter().product();
    let payload = cursor.take(count * 4)?;
    if cursor.remaining() != 0 {
        return Err(Error::DimensionMismatch(format!(
            "{label}: {} trailing bytes after payload",
            cursor.remaining()
        )));
    }
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(label.to_string()));
    }
    Ok(FeatureTensor { dims, data })
}

pub fn write_tensor(path: &Path, tensor: &FeatureTensor) -> Result<()> {
    fs::write(path, encode_tensor(tensor)).map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: &Path) -> Result<FeatureTensor> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_tensor(&bytes, &path.display().to_string())
}

/// Little-endian reader over a byte slice that reports truncation.
pub(crate) struct ByteCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    label: &'a str,
}

impl<'a> ByteCursor<'a> {
    pub(crate) fn new(bytes: &'a [u8], label: &'a str) -> Self {
        Self { bytes, pos: 0, label }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Truncated(format!(
                "{}: need {} bytes at offset {}, have {}",
                self.label,
                n,
                self.pos,
                self.bytes.len() - self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        let b = self.take(8)?;
        let mut a = [0u8; 8];
        a.copy_from_slice(b);
        Ok(f64::from_le_bytes(a))
    }

    pub(crate) fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}
