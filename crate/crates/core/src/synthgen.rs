//! Synthetic corpora with a closed-form feature → F0 mapping.
//!
//! Each speaker gets a random x-vector whose first coordinate is `+1` for
//! female and `-1` for male speakers. Bottleneck rows follow a stationary
//! AR(1) walk with standard-normal marginals. Log-F0 is the gender base
//! plus a fixed linear function of the first few bottleneck coordinates;
//! a frame is voiced iff `bn[1] > voicing_threshold`.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::featureio::{Dataset, Gender, Role, Utterance, UtteranceMeta};
use crate::rng::seeded_rng;

/// Lag-one correlation of the bottleneck walk.
pub const WALK_CORRELATION: f64 = 0.8;
/// Number of leading bottleneck coordinates driving log-F0.
pub const MAPPING_SLICE: usize = 4;
pub const VOICING_COORD: usize = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_speakers_per_gender: usize,
    pub utts_per_speaker: usize,
    pub frames_per_utt: usize,
    pub d_bn: usize,
    pub d_xv: usize,
    pub base_f0_female: f64,
    pub base_f0_male: f64,
    pub weight_scale: f64,
    pub voicing_threshold: f64,
    pub noise_std_cents: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_speakers_per_gender: 10,
            utts_per_speaker: 10,
            frames_per_utt: 500,
            d_bn: 16,
            d_xv: 8,
            base_f0_female: 190.0,
            base_f0_male: 120.0,
            weight_scale: 0.15,
            voicing_threshold: 0.0,
            noise_std_cents: 0.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_speakers_per_gender", self.n_speakers_per_gender),
            ("utts_per_speaker", self.utts_per_speaker),
            ("frames_per_utt", self.frames_per_utt),
            ("d_xv", self.d_xv),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("synth {name} must be positive")));
            }
        }
        if self.d_bn <= VOICING_COORD {
            return Err(Error::InvalidConfig(format!(
                "synth d_bn must be at least {}",
                VOICING_COORD + 1
            )));
        }
        if !(self.base_f0_female > 0.0 && self.base_f0_male > 0.0) {
            return Err(Error::InvalidConfig("synth base F0 must be positive".into()));
        }
        if self.noise_std_cents.is_nan()
            || self.noise_std_cents < 0.0
            || !self.weight_scale.is_finite()
            || !self.voicing_threshold.is_finite()
        {
            return Err(Error::InvalidConfig("synth noise/weight/threshold out of range".into()));
        }
        Ok(())
    }

    pub fn total_frames(&self) -> usize {
        2 * self.n_speakers_per_gender * self.utts_per_speaker * self.frames_per_utt
    }
}

/// The exact rule that generated a synthetic corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthMapping {
    pub base_f0_female: f64,
    pub base_f0_male: f64,
    /// Unit-norm weights over `bn[0..weights.len()]`.
    pub weights: Vec<f64>,
    pub weight_scale: f64,
    pub voicing_threshold: f64,
}

impl GroundTruthMapping {
    pub fn gender_of(&self, xvec: &[f32]) -> Gender {
        if xvec[0] >= 0.0 {
            Gender::F
        } else {
            Gender::M
        }
    }

    pub fn voiced(&self, bn_row: &[f32]) -> bool {
        bn_row[VOICING_COORD] as f64 > self.voicing_threshold
    }

    pub fn log_f0(&self, gender: Gender, bn_row: &[f32]) -> f64 {
        let base = match gender {
            Gender::F => self.base_f0_female,
            Gender::M => self.base_f0_male,
        };
        let lin: f64 = self.weights.iter().zip(bn_row).map(|(w, &x)| w * x as f64).sum();
        base.ln() + self.weight_scale * lin
    }

    /// Noiseless F0 in Hz as stored in feature files (0 when unvoiced).
    pub fn f0(&self, xvec: &[f32], bn_row: &[f32]) -> f32 {
        if self.voiced(bn_row) {
            self.log_f0(self.gender_of(xvec), bn_row).exp() as f32
        } else {
            0.0
        }
    }
}

/// splitmix64 finalizer; derives independent stream seeds.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

pub fn generate_synthetic_dataset(spec: &SynthSpec) -> Result<(Dataset, GroundTruthMapping)> {
    spec.validate()?;
    let mut rng = seeded_rng(derive_seed(spec.seed, 0));
    let k = MAPPING_SLICE.min(spec.d_bn);
    let raw: Vec<f64> = (0..k).map(|_| normal(&mut rng)).collect();
    let norm = raw.iter().map(|w| w * w).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let mapping = GroundTruthMapping {
        base_f0_female: spec.base_f0_female,
        base_f0_male: spec.base_f0_male,
        weights: raw.iter().map(|w| w / norm).collect(),
        weight_scale: spec.weight_scale,
        voicing_threshold: spec.voicing_threshold,
    };

    let innovation = (1.0 - WALK_CORRELATION * WALK_CORRELATION).sqrt();
    let noise_log = spec.noise_std_cents / 1200.0 * std::f64::consts::LN_2;
    let mut utterances = Vec::with_capacity(2 * spec.n_speakers_per_gender * spec.utts_per_speaker);
    let mut speaker_index = 0u64;
    for gender in [Gender::F, Gender::M] {
        for s in 0..spec.n_speakers_per_gender {
            speaker_index += 1;
            let speaker_id = format!("{gender}{s:03}");
            let mut srng = seeded_rng(derive_seed(spec.seed, speaker_index << 20));
            let mut xvec = Vec::with_capacity(spec.d_xv);
            xvec.push(if gender == Gender::F { 1.0f32 } else { -1.0 });
            xvec.extend((1..spec.d_xv).map(|_| normal(&mut srng) as f32));

            for u in 0..spec.utts_per_speaker {
                let mut urng = seeded_rng(derive_seed(spec.seed, (speaker_index << 20) | (u as u64 + 1)));
                let mut bn = Array2::<f32>::zeros((spec.frames_per_utt, spec.d_bn));
                let mut state: Vec<f64> = (0..spec.d_bn).map(|_| normal(&mut urng)).collect();
                let mut f0 = Vec::with_capacity(spec.frames_per_utt);
                for n in 0..spec.frames_per_utt {
                    if n > 0 {
                        for x in state.iter_mut() {
                            *x = WALK_CORRELATION * *x + innovation * normal(&mut urng);
                        }
                    }
                    let row: Vec<f32> = state.iter().map(|&x| x as f32).collect();
                    let mut value = 0.0f32;
                    if mapping.voiced(&row) {
                        let mut logf0 = mapping.log_f0(gender, &row);
                        if noise_log > 0.0 {
                            logf0 += noise_log * normal(&mut urng);
                        }
                        value = logf0.exp() as f32;
                    }
                    f0.push(value);
                    bn.row_mut(n).iter_mut().zip(&row).for_each(|(d, &s)| *d = s);
                }
                utterances.push(Utterance::new(
                    UtteranceMeta {
                        utt_id: format!("{speaker_id}_u{u:03}"),
                        speaker_id: speaker_id.clone(),
                        gender,
                    },
                    f0,
                    bn,
                    xvec.clone(),
                )?);
            }
        }
    }
    Ok((Dataset::new(Role::Train, utterances)?, mapping))
}

/// Splits off every speaker's last `held_out` utterances as validation data.
pub fn split_by_utterance(dataset: &Dataset, held_out: usize) -> Result<(Dataset, Dataset)> {
    use std::collections::HashMap;
    let mut per_speaker: HashMap<&str, usize> = HashMap::new();
    for u in dataset.utterances() {
        *per_speaker.entry(u.speaker_id()).or_default() += 1;
    }
    let mut seen: HashMap<&str, usize> = HashMap::new();
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for u in dataset.utterances() {
        let idx = seen.entry(u.speaker_id()).or_default();
        let total = per_speaker[u.speaker_id()];
        if *idx + held_out >= total && total > held_out {
            val.push(u.clone());
        } else {
            train.push(u.clone());
        }
        *idx += 1;
    }
    Ok((Dataset::new(Role::Train, train)?, Dataset::new(Role::Validation, val)?))
}
