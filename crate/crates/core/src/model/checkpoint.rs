//! Model checkpoint files.
//!
//! Layout (integers u32 LE, reals binary64 LE):
//! `F0MD`, version = 1, input_dim, hidden layer count, hidden sizes, dropout,
//! input_mean[input_dim], input_std[input_dim], logf0_mean, logf0_std,
//! then per layer its row-major `out × in` weights followed by the bias.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::{DenseLayer, ModelConfig, ModelParams};
use crate::error::{Error, Result};
use crate::featureio::{ByteCursor, NormStats};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"F0MD";
const CHECKPOINT_VERSION: u32 = 1;

pub fn encode_checkpoint(params: &ModelParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(64 + 8 * params.num_parameters());
    let put_u32 = |out: &mut Vec<u8>, v: usize| out.extend_from_slice(&(v as u32).to_le_bytes());
    let put_f64 = |out: &mut Vec<u8>, v: f64| out.extend_from_slice(&v.to_le_bytes());

    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    put_u32(&mut out, params.config.input_dim);
    put_u32(&mut out, params.config.hidden_sizes.len());
    for &h in &params.config.hidden_sizes {
        put_u32(&mut out, h);
    }
    put_f64(&mut out, params.config.dropout);
    for &v in params.norm.input_mean.iter().chain(&params.norm.input_std) {
        put_f64(&mut out, v);
    }
    put_f64(&mut out, params.norm.logf0_mean);
    put_f64(&mut out, params.norm.logf0_std);
    for t in params.tensors() {
        for &v in t {
            put_f64(&mut out, v);
        }
    }
    out
}

pub fn decode_checkpoint(bytes: &[u8], label: &str) -> Result<ModelParams> {
    let mut c = ByteCursor::new(bytes, label);
    if c.take(4)? != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic(label.to_string(), "F0MD"));
    }
    let version = c.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let input_dim = c.u32()? as usize;
    let n_hidden = c.u32()? as usize;
    // Bound the allocation before trusting the count.
    if n_hidden * 4 > c.remaining() {
        return Err(Error::Truncated(format!("{label}: hidden layer list")));
    }
    let hidden_sizes = (0..n_hidden)
        .map(|_| c.u32().map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let config = ModelConfig {
        input_dim,
        hidden_sizes,
        dropout: c.f64()?,
    };
    config.validate()?;

    let mut read_vec = |n: usize| -> Result<Vec<f64>> {
        if n * 8 > c.remaining() {
            return Err(Error::Truncated(format!("{label}: need {n} reals")));
        }
        (0..n).map(|_| c.f64()).collect()
    };
    let input_mean = read_vec(input_dim)?;
    let input_std = read_vec(input_dim)?;
    let logf0 = read_vec(2)?;
    let norm = NormStats {
        input_mean,
        input_std,
        logf0_mean: logf0[0],
        logf0_std: logf0[1],
    };
    let mut layers = Vec::new();
    for (o, i) in config.layer_shapes() {
        let w = read_vec(o * i)?;
        let b = read_vec(o)?;
        layers.push(DenseLayer {
            weights: Array2::from_shape_vec((o, i), w).expect("sized"),
            bias: Array1::from(b),
        });
    }
    if c.remaining() != 0 {
        return Err(Error::DimensionMismatch(format!(
            "{label}: {} trailing bytes",
            c.remaining()
        )));
    }
    let params = ModelParams { config, layers, norm };
    let finite = params.tensors().all(|t| t.iter().all(|v| v.is_finite()))
        && params
            .norm
            .input_mean
            .iter()
            .chain(&params.norm.input_std)
            .all(|v| v.is_finite())
        && params.norm.logf0_mean.is_finite()
        && params.norm.logf0_std.is_finite();
    if !finite {
        return Err(Error::NonFinite(label.to_string()));
    }
    Ok(params)
}

pub fn save_checkpoint(path: &Path, params: &ModelParams) -> Result<()> {
    fs::write(path, encode_checkpoint(params)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<ModelParams> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_params;

    #[test]
    fn roundtrip_is_byte_identical() {
        let mut p = init_params(
            &ModelConfig {
                input_dim: 6,
                hidden_sizes: vec![5, 4, 3, 2],
                dropout: 0.1,
            },
            17,
        )
        .unwrap();
        p.norm.logf0_mean = 5.0;
        p.norm.input_std[2] = 0.25;
        let bytes = encode_checkpoint(&p);
        let back = decode_checkpoint(&bytes, "ck").unwrap();
        assert_eq!(back, p);
        assert_eq!(encode_checkpoint(&back), bytes);
    }

    #[test]
    fn corrupt_checkpoints_rejected() {
        let p = init_params(&ModelConfig::desk(3), 1).unwrap();
        let bytes = encode_checkpoint(&p);
        assert!(matches!(
            decode_checkpoint(&bytes[..bytes.len() - 1], "ck"),
            Err(Error::Truncated(_))
        ));
        let mut bad = bytes.clone();
        bad[3] = b'X';
        assert!(matches!(decode_checkpoint(&bad, "ck"), Err(Error::BadMagic(..))));
        let mut long = bytes;
        long.push(0);
        assert!(decode_checkpoint(&long, "ck").is_err());
    }
}
