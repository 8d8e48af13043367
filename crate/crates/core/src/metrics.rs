//! Pitch evaluation: voiced/unvoiced confusion, gross and fine pitch error,
//! the accurately-processed frame fraction, cents error and pitch correlation.
//!
//! A frame is voiced iff its value is `> 0`. Relative error is measured
//! against the truth, `|pred - truth| / truth`. An error of exactly 20% is not
//! gross; the fine-error denominator takes every frame at or below 20%.
//! Undefined ratios are `None`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::model::F0Trajectory;

pub const GROSS_ERROR_THRESHOLD: f64 = 0.20;
pub const FINE_ERROR_THRESHOLD: f64 = 0.05;
/// Minimum pitch correlation accepted for anonymized speech.
pub const RHO_F0_THRESHOLD: f64 = 0.3;

/// Voiced is the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> Option<f64> {
        ratio(self.tp + self.tn, self.total())
    }

    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }
}

impl std::ops::AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.tn += o.tn;
        self.fn_ += o.fn_;
    }
}

/// Every count needed by the ratio metrics, gathered in one pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PitchCounts {
    pub confusion: ConfusionCounts,
    /// Correctly-voiced frames with relative error > 20%.
    pub gross: u64,
    /// Correctly-voiced frames with relative error <= 20%.
    pub within_gross: u64,
    /// Of `within_gross`, those with relative error > 5%.
    pub fine: u64,
}

impl PitchCounts {
    pub fn gpe(&self) -> Option<f64> {
        ratio(self.gross, self.confusion.tp)
    }

    pub fn fpe(&self) -> Option<f64> {
        ratio(self.fine, self.within_gross)
    }

    pub fn accurately_processed(&self) -> Option<f64> {
        ratio(self.confusion.tn + self.within_gross, self.confusion.total())
    }
}

impl std::ops::AddAssign for PitchCounts {
    fn add_assign(&mut self, o: Self) {
        self.confusion += o.confusion;
        self.gross += o.gross;
        self.within_gross += o.within_gross;
        self.fine += o.fine;
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn check_len(pred: &[f64], truth: &[f64]) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch(pred.len(), truth.len()));
    }
    Ok(())
}

pub fn relative_error(pred: f64, truth: f64) -> f64 {
    (pred - truth).abs() / truth
}

pub fn pitch_counts(pred: &[f64], truth: &[f64]) -> Result<PitchCounts> {
    check_len(pred, truth)?;
    let mut c = PitchCounts::default();
    for (&p, &t) in pred.iter().zip(truth) {
        let pv = (p > 0.0) as u64;
        let tv = (t > 0.0) as u64;
        let both = pv & tv;
        c.confusion.tp += both;
        c.confusion.fp += pv & (1 - tv);
        c.confusion.fn_ += (1 - pv) & tv;
        c.confusion.tn += (1 - pv) & (1 - tv);
        if both == 1 {
            let e = relative_error(p, t);
            let gross = (e > GROSS_ERROR_THRESHOLD) as u64;
            c.gross += gross;
            c.within_gross += 1 - gross;
            c.fine += (1 - gross) & ((e > FINE_ERROR_THRESHOLD) as u64);
        }
    }
    Ok(c)
}

pub fn vuv_confusion(pred: &[f64], truth: &[f64]) -> Result<ConfusionCounts> {
    Ok(pitch_counts(pred, truth)?.confusion)
}

/// Gross pitch error over frames voiced in both contours.
pub fn gpe(pred: &[f64], truth: &[f64]) -> Result<Option<f64>> {
    Ok(pitch_counts(pred, truth)?.gpe())
}

/// Fine pitch error over correctly-voiced frames within the gross band.
pub fn fpe(pred: &[f64], truth: &[f64]) -> Result<Option<f64>> {
    Ok(pitch_counts(pred, truth)?.fpe())
}

/// Fraction of frames that are correctly unvoiced, or correctly voiced
/// without a gross error.
pub fn accurately_processed(pred: &[f64], truth: &[f64]) -> Result<f64> {
    pitch_counts(pred, truth)?
        .accurately_processed()
        .ok_or_else(|| Error::InvalidArgument("accurately_processed needs at least one frame".into()))
}

/// `1200 · log2(pred / truth)`.
pub fn cents_error(pred_hz: f64, truth_hz: f64) -> Result<f64> {
    if !(pred_hz > 0.0 && truth_hz > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "cents error needs positive frequencies, got {pred_hz} and {truth_hz}"
        )));
    }
    Ok(1200.0 * (pred_hz / truth_hz).log2())
}

/// Pearson correlation over frames voiced in both contours. `None` with fewer
/// than two such frames or zero variance on either side.
pub fn pitch_correlation(a: &[f64], b: &[f64]) -> Result<Option<f64>> {
    check_len(a, b)?;
    let pairs: Vec<(f64, f64)> = a
        .iter()
        .zip(b)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(&x, &y)| (x, y))
        .collect();
    if pairs.len() < 2 {
        return Ok(None);
    }
    let n = pairs.len() as f64;
    let ma = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let mb = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for &(x, y) in &pairs {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Ok(None);
    }
    Ok(Some((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0)))
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MetricsReport {
    pub gpe: Option<f64>,
    pub fpe: Option<f64>,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub accurately_processed: Option<f64>,
    pub pitch_correlation: Option<f64>,
    pub counts: PitchCounts,
}

impl MetricsReport {
    /// Builds a report from pooled counts and per-utterance correlations.
    pub fn from_parts(counts: PitchCounts, correlations: &[Option<f64>]) -> Self {
        let defined: Vec<f64> = correlations.iter().flatten().copied().collect();
        let pitch_correlation = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
        Self {
            gpe: counts.gpe(),
            fpe: counts.fpe(),
            accuracy: counts.confusion.accuracy(),
            precision: counts.confusion.precision(),
            recall: counts.confusion.recall(),
            accurately_processed: counts.accurately_processed(),
            pitch_correlation,
            counts,
        }
    }
}

/// Micro-averaged report: counts are pooled over every frame of every
/// utterance before ratios are taken. Pitch correlation is the mean of the
/// defined per-utterance values. Predictions are matched to truth by id.
pub fn evaluate_utterances(
    pred_set: &[(String, F0Trajectory)],
    truth_set: &[(String, F0Trajectory)],
) -> Result<MetricsReport> {
    let truth: HashMap<&str, &F0Trajectory> = truth_set.iter().map(|(id, t)| (id.as_str(), t)).collect();
    if pred_set.len() != truth_set.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} reference utterances",
            pred_set.len(),
            truth_set.len()
        )));
    }
    let mut counts = PitchCounts::default();
    let mut correlations = Vec::with_capacity(pred_set.len());
    for (id, pred) in pred_set {
        let t = truth
            .get(id.as_str())
            .ok_or_else(|| Error::InvalidArgument(format!("no reference for utterance {id}")))?;
        counts += pitch_counts(pred, t)?;
        correlations.push(pitch_correlation(pred, t)?);
    }
    Ok(MetricsReport::from_parts(counts, &correlations))
}

pub const REPORT_HEADER: &str = "dataset,sex,gpe,fpe,accuracy,precision,recall,accurately_processed,rho_f0";

fn pct(v: Option<f64>) -> String {
    v.map(|x| format!("{:.1}", 100.0 * x)).unwrap_or_default()
}

/// One CSV row; rates as percentages with one decimal, absent values empty.
/// Pitch correlation is a coefficient, printed with three decimals.
pub fn format_report_row(dataset: &str, sex: &str, r: &MetricsReport) -> String {
    format!(
        "{dataset},{sex},{},{},{},{},{},{},{}",
        pct(r.gpe),
        pct(r.fpe),
        pct(r.accuracy),
        pct(r.precision),
        pct(r.recall),
        pct(r.accurately_processed),
        r.pitch_correlation.map(|v| format!("{v:.3}")).unwrap_or_default()
    )
}
