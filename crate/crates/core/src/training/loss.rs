use crate::error::{Error, Result};
use crate::model::sigmoid;

/// Value and exact output-side partials of `L1 + α·BCE`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub loss: f64,
    pub l1: f64,
    pub bce: f64,
    pub d_f0hat: Vec<f64>,
    pub d_logits: Vec<f64>,
}

/// Numerically stable binary cross-entropy with logits for one frame.
pub fn bce_with_logits(g: f64, v: f64) -> f64 {
    g.max(0.0) - g * v + (-g.abs()).exp().ln_1p()
}

/// Composite loss: mean absolute log-F0 error over voiced frames (0 when no
/// frame is voiced) plus `alpha` times the mean voicing BCE over all frames.
/// Targets at unvoiced frames are ignored.
pub fn composite_loss(
    f0hat_norm: &[f64],
    logits: &[f64],
    target_logf0_norm: &[f64],
    voiced: &[bool],
    alpha: f64,
) -> Result<LossOutput> {
    let b = f0hat_norm.len();
    for len in [logits.len(), target_logf0_norm.len(), voiced.len()] {
        if len != b {
            return Err(Error::LengthMismatch(b, len));
        }
    }
    if b == 0 {
        return Err(Error::InvalidArgument("loss over an empty batch".into()));
    }
    let non_finite = f0hat_norm.iter().chain(logits).any(|v| v.is_nan())
        || voiced.iter().zip(target_logf0_norm).any(|(&v, t)| v && !t.is_finite());
    if non_finite || alpha.is_nan() {
        return Err(Error::NonFinite("loss inputs".into()));
    }

    let n_voiced = voiced.iter().filter(|&&v| v).count();
    let inv_voiced = if n_voiced > 0 { 1.0 / n_voiced as f64 } else { 0.0 };
    let inv_b = 1.0 / b as f64;

    let mut l1 = 0.0;
    let mut bce = 0.0;
    let mut d_f0hat = vec![0.0; b];
    let mut d_logits = vec![0.0; b];
    for i in 0..b {
        let v = if voiced[i] { 1.0 } else { 0.0 };
        if voiced[i] {
            let diff = f0hat_norm[i] - target_logf0_norm[i];
            l1 += diff.abs();
            d_f0hat[i] = if diff > 0.0 {
                inv_voiced
            } else if diff < 0.0 {
                -inv_voiced
            } else {
                0.0
            };
        }
        bce += bce_with_logits(logits[i], v);
        d_logits[i] = alpha * (sigmoid(logits[i]) - v) * inv_b;
    }
    l1 *= inv_voiced;
    bce *= inv_b;
    Ok(LossOutput {
        loss: l1 + alpha * bce,
        l1,
        bce,
        d_f0hat,
        d_logits,
    })
}
