//! Feature ingestion: per-utterance binary feature files, CSV manifests,
//! and the tall frame table used for training.

mod format;
mod manifest;
mod table;

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use ndarray::{Array2, ArrayView1};

use crate::error::{Error, Result};

pub(crate) use format::ByteCursor;
pub use format::{
    decode_tensor, encode_tensor, read_tensor, write_tensor, FeatureTensor, FEATURE_MAGIC, FEATURE_VERSION,
};
pub use manifest::{load_manifest, write_dataset, write_manifest, ManifestRow, MANIFEST_HEADER};
pub use table::{build_frame_table, compute_norm_stats, FrameTable, NormStats, STD_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Gender {
    F,
    M,
}

impl Gender {
    pub fn opposite(self) -> Gender {
        match self {
            Gender::F => Gender::M,
            Gender::M => Gender::F,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Gender::F => 'F',
            Gender::M => 'M',
        }
    }
}

impl FromStr for Gender {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "F" => Ok(Gender::F),
            "M" => Ok(Gender::M),
            other => Err(Error::UnknownGender(other.to_string())),
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// Feature dimensionalities shared by every utterance in a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureDims {
    pub d_bn: usize,
    pub d_xv: usize,
}

impl Default for FeatureDims {
    fn default() -> Self {
        Self { d_bn: 256, d_xv: 512 }
    }
}

impl FeatureDims {
    pub fn input_dim(&self) -> usize {
        self.d_bn + self.d_xv
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtteranceMeta {
    pub utt_id: String,
    pub speaker_id: String,
    pub gender: Gender,
}

/// One recording's frame-aligned features.
///
/// Invariants checked on construction: `f0.len() == bn.nrows()`, all values
/// finite, F0 non-negative (0 marks an unvoiced frame).
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    meta: UtteranceMeta,
    f0: Vec<f32>,
    bn: Array2<f32>,
    xvec: Vec<f32>,
}

impl Utterance {
    pub fn new(meta: UtteranceMeta, f0: Vec<f32>, bn: Array2<f32>, xvec: Vec<f32>) -> Result<Self> {
        if f0.len() != bn.nrows() {
            return Err(Error::FrameAlignment {
                utt_id: meta.utt_id.clone(),
                f0_len: f0.len(),
                bn_rows: bn.nrows(),
            });
        }
        if f0.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("{} f0", meta.utt_id)));
        }
        if let Some((frame, &value)) = f0.iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(Error::NegativeF0 { frame, value });
        }
        if bn.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("{} bn", meta.utt_id)));
        }
        if xvec.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("{} xvec", meta.utt_id)));
        }
        Ok(Self { meta, f0, bn, xvec })
    }

    pub fn meta(&self) -> &UtteranceMeta {
        &self.meta
    }

    pub fn utt_id(&self) -> &str {
        &self.meta.utt_id
    }

    pub fn speaker_id(&self) -> &str {
        &self.meta.speaker_id
    }

    pub fn gender(&self) -> Gender {
        self.meta.gender
    }

    pub fn f0(&self) -> &[f32] {
        &self.f0
    }

    pub fn bn(&self) -> &Array2<f32> {
        &self.bn
    }

    pub fn xvec(&self) -> &[f32] {
        &self.xvec
    }

    pub fn num_frames(&self) -> usize {
        self.f0.len()
    }

    pub fn dims(&self) -> FeatureDims {
        FeatureDims {
            d_bn: self.bn.ncols(),
            d_xv: self.xvec.len(),
        }
    }

    pub fn voiced_mask(&self) -> Vec<bool> {
        self.f0.iter().map(|&v| v > 0.0).collect()
    }

    /// F0 trajectory in Hz, widened to f64.
    pub fn f0_hz(&self) -> Vec<f64> {
        self.f0.iter().map(|&v| v as f64).collect()
    }

    /// Raw network inputs, one row `[xvec ∥ bn[n]]` per frame. `xvec_override`
    /// substitutes a different speaker embedding (anonymization routing).
    pub fn input_matrix(&self, xvec_override: Option<&[f64]>) -> Result<Array2<f64>> {
        let d_xv = self.xvec.len();
        let d_bn = self.bn.ncols();
        let xv: Vec<f64> = match xvec_override {
            Some(x) if x.len() != d_xv => {
                return Err(Error::DimensionMismatch(format!(
                    "xvec override has {} dims, utterance {} has {}",
                    x.len(),
                    self.meta.utt_id,
                    d_xv
                )))
            }
            Some(x) => x.to_vec(),
            None => self.xvec.iter().map(|&v| v as f64).collect(),
        };
        let mut out = Array2::<f64>::zeros((self.num_frames(), d_xv + d_bn));
        for (mut row, bn_row) in out.rows_mut().into_iter().zip(self.bn.rows()) {
            for (dst, &x) in row.iter_mut().zip(&xv) {
                *dst = x;
            }
            fill_bn(row.slice_mut(ndarray::s![d_xv..]).iter_mut(), bn_row);
        }
        Ok(out)
    }
}

fn fill_bn<'a>(dst: impl Iterator<Item = &'a mut f64>, src: ArrayView1<f32>) {
    for (d, &s) in dst.zip(src.iter()) {
        *d = s as f64;
    }
}

/// Reads the three feature files of one utterance and validates them.
pub fn read_utterance(f0_path: &Path, bn_path: &Path, xvec_path: &Path, meta: UtteranceMeta) -> Result<Utterance> {
    let f0 = read_tensor(f0_path)?;
    if f0.rank() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "{}: F0 file must be rank 1, got rank {}",
            f0_path.display(),
            f0.rank()
        )));
    }
    let bn = read_tensor(bn_path)?;
    if bn.rank() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "{}: BN file must be rank 2, got rank {}",
            bn_path.display(),
            bn.rank()
        )));
    }
    let xvec = read_tensor(xvec_path)?;
    let xvec_ok = xvec.rank() == 1 || (xvec.rank() == 2 && xvec.dims[0] == 1);
    if !xvec_ok {
        return Err(Error::DimensionMismatch(format!(
            "{}: X-vector file must be shaped (D) or (1xD), got {:?}",
            xvec_path.display(),
            xvec.dims
        )));
    }
    let bn = Array2::from_shape_vec((bn.dims[0], bn.dims[1]), bn.data)
        .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
    Utterance::new(meta, f0.data, bn, xvec.data)
}

pub fn write_utterance(utt: &Utterance, f0_path: &Path, bn_path: &Path, xvec_path: &Path) -> Result<()> {
    write_tensor(f0_path, &FeatureTensor::vector(utt.f0.clone()))?;
    let bn = utt.bn.as_standard_layout().iter().copied().collect();
    write_tensor(bn_path, &FeatureTensor::matrix(utt.bn.nrows(), utt.bn.ncols(), bn))?;
    write_tensor(xvec_path, &FeatureTensor::vector(utt.xvec.clone()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Train,
    Validation,
    Test,
}

/// Ordered utterances with unique ids and shared feature dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    role: Role,
    utterances: Vec<Utterance>,
}

impl Dataset {
    pub fn new(role: Role, utterances: Vec<Utterance>) -> Result<Self> {
        let mut seen = HashSet::new();
        for u in &utterances {
            if !seen.insert(u.utt_id()) {
                return Err(Error::DuplicateUttId(u.utt_id().to_string()));
            }
        }
        if let Some(first) = utterances.first() {
            let dims = first.dims();
            if let Some(bad) = utterances.iter().find(|u| u.dims() != dims) {
                return Err(Error::DimensionMismatch(format!(
                    "utterance {} has dims {:?}, dataset uses {:?}",
                    bad.utt_id(),
                    bad.dims(),
                    dims
                )));
            }
        }
        Ok(Self { role, utterances })
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn utterances(&self) -> &[Utterance] {
        &self.utterances
    }

    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    pub fn dims(&self) -> Option<FeatureDims> {
        self.utterances.first().map(Utterance::dims)
    }

    pub fn total_frames(&self) -> usize {
        self.utterances.iter().map(Utterance::num_frames).sum()
    }

    pub fn into_utterances(self) -> Vec<Utterance> {
        self.utterances
    }
}
