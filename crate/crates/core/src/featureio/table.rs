use ndarray::{Array2, ArrayView1, ArrayViewMut2, Axis};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::seeded_permutation;

/// Floor applied to every standard deviation before division.
pub const STD_FLOOR: f64 = 1e-8;

/// Per-frame training rows concatenated across utterances.
///
/// Inputs stay in binary32 (they come straight from feature files); batches
/// are widened to f64 when gathered. Unvoiced rows carry target 0.0 and are
/// never read by the regression loss.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameTable {
    inputs: Array2<f32>,
    target_logf0: Vec<f64>,
    voiced: Vec<bool>,
    utt_ids: Vec<String>,
    provenance: Vec<(usize, usize)>,
}

impl FrameTable {
    pub fn len(&self) -> usize {
        self.voiced.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voiced.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn inputs(&self) -> &Array2<f32> {
        &self.inputs
    }

    pub fn input_row(&self, r: usize) -> ArrayView1<'_, f32> {
        self.inputs.row(r)
    }

    pub fn target_logf0(&self) -> &[f64] {
        &self.target_logf0
    }

    pub fn voiced(&self) -> &[bool] {
        &self.voiced
    }

    pub fn num_voiced(&self) -> usize {
        self.voiced.iter().filter(|&&v| v).count()
    }

    /// `(utt_id, frame index)` of row `r`.
    pub fn provenance(&self, r: usize) -> (&str, usize) {
        let (u, f) = self.provenance[r];
        (&self.utt_ids[u], f)
    }

    /// Copies the given rows into `dst` (widened, normalized with `norm`),
    /// and returns their normalized targets and voicing labels.
    pub fn gather_normalized(
        &self,
        rows: &[usize],
        norm: &NormStats,
        mut dst: ArrayViewMut2<f64>,
        targets: &mut Vec<f64>,
        voiced: &mut Vec<bool>,
    ) {
        targets.clear();
        voiced.clear();
        for (i, &r) in rows.iter().enumerate() {
            let src = self.inputs.row(r);
            let mut out = dst.row_mut(i);
            for (j, (o, &x)) in out.iter_mut().zip(src.iter()).enumerate() {
                *o = (x as f64 - norm.input_mean[j]) / norm.input_std[j];
            }
            let v = self.voiced[r];
            voiced.push(v);
            targets.push(if v {
                norm.normalize_logf0(self.target_logf0[r])
            } else {
                0.0
            });
        }
    }
}

/// Concatenates every utterance's frames into one table; rows are
/// `[xvec ∥ bn[n]]`. With a seed, rows are permuted by a seeded shuffle.
pub fn build_frame_table(dataset: &Dataset, seed: Option<u64>) -> Result<FrameTable> {
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let dims = dataset.dims().expect("non-empty");
    let total = dataset.total_frames();
    let width = dims.input_dim();
    let mut inputs = Array2::<f32>::zeros((total, width));
    let mut target_logf0 = Vec::with_capacity(total);
    let mut voiced = Vec::with_capacity(total);
    let mut provenance = Vec::with_capacity(total);
    let mut utt_ids = Vec::with_capacity(dataset.len());

    let mut r = 0;
    for (ui, utt) in dataset.utterances().iter().enumerate() {
        utt_ids.push(utt.utt_id().to_string());
        for (n, &f0) in utt.f0().iter().enumerate() {
            let mut row = inputs.row_mut(r);
            let (xv_part, mut bn_part) = row.view_mut().split_at(Axis(0), dims.d_xv);
            xv_part.into_iter().zip(utt.xvec()).for_each(|(d, &s)| *d = s);
            bn_part.assign(&utt.bn().row(n));
            let is_voiced = f0 > 0.0;
            voiced.push(is_voiced);
            target_logf0.push(if is_voiced { (f0 as f64).ln() } else { 0.0 });
            provenance.push((ui, n));
            r += 1;
        }
    }

    let mut table = FrameTable {
        inputs,
        target_logf0,
        voiced,
        utt_ids,
        provenance,
    };
    if let Some(seed) = seed {
        table = permute(&table, &seeded_permutation(total, seed));
    }
    Ok(table)
}

fn permute(table: &FrameTable, perm: &[usize]) -> FrameTable {
    FrameTable {
        inputs: table.inputs.select(Axis(0), perm),
        target_logf0: perm.iter().map(|&i| table.target_logf0[i]).collect(),
        voiced: perm.iter().map(|&i| table.voiced[i]).collect(),
        utt_ids: table.utt_ids.clone(),
        provenance: perm.iter().map(|&i| table.provenance[i]).collect(),
    }
}

/// Global mean/variance normalization for network inputs and log-F0 targets.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub input_mean: Vec<f64>,
    pub input_std: Vec<f64>,
    pub logf0_mean: f64,
    pub logf0_std: f64,
}

impl NormStats {
    /// Pass-through statistics (mean 0, std 1).
    pub fn identity(input_dim: usize) -> Self {
        Self {
            input_mean: vec![0.0; input_dim],
            input_std: vec![1.0; input_dim],
            logf0_mean: 0.0,
            logf0_std: 1.0,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_mean.len()
    }

    pub fn normalize_inputs(&self, x: &mut Array2<f64>) {
        for mut row in x.rows_mut() {
            for ((v, m), s) in row.iter_mut().zip(&self.input_mean).zip(&self.input_std) {
                *v = (*v - m) / s;
            }
        }
    }

    pub fn normalize_logf0(&self, logf0: f64) -> f64 {
        (logf0 - self.logf0_mean) / self.logf0_std
    }

    pub fn denormalize_logf0(&self, z: f64) -> f64 {
        z * self.logf0_std + self.logf0_mean
    }
}

/// Population statistics: inputs over all rows, log-F0 over voiced rows only.
/// Standard deviations are floored at [`STD_FLOOR`].
pub fn compute_norm_stats(table: &FrameTable) -> Result<NormStats> {
    let voiced: Vec<f64> = table
        .voiced
        .iter()
        .zip(&table.target_logf0)
        .filter(|(v, _)| **v)
        .map(|(_, &t)| t)
        .collect();
    if voiced.is_empty() {
        return Err(Error::NoVoicedFrames);
    }
    let rows = table.len() as f64;
    let width = table.input_dim();
    let mut mean = vec![0.0f64; width];
    for row in table.inputs.rows() {
        for (m, &x) in mean.iter_mut().zip(row.iter()) {
            *m += x as f64;
        }
    }
    mean.iter_mut().for_each(|m| *m /= rows);
    let mut var = vec![0.0f64; width];
    for row in table.inputs.rows() {
        for ((v, &x), m) in var.iter_mut().zip(row.iter()).zip(&mean) {
            let d = x as f64 - m;
            *v += d * d;
        }
    }
    let input_std = var.iter().map(|v| (v / rows).sqrt().max(STD_FLOOR)).collect();

    let n = voiced.len() as f64;
    let logf0_mean = voiced.iter().sum::<f64>() / n;
    let logf0_var = voiced.iter().map(|t| (t - logf0_mean).powi(2)).sum::<f64>() / n;

    Ok(NormStats {
        input_mean: mean,
        input_std,
        logf0_mean,
        logf0_std: logf0_var.sqrt().max(STD_FLOOR),
    })
}
