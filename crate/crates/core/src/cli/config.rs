//! Flat `section.key = value` run configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Later assignments
//! override earlier ones; command-line `--set` pairs are applied last.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::anonymize::{ContrastiveMode, Distance, F0Domain, GenderMode, SelectionParams};
use crate::error::{Error, Result};
use crate::model::{ModelConfig, DEFAULT_HIDDEN};
use crate::synthgen::SynthSpec;
use crate::training::TrainConfig;

pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::InvalidConfig(format!("line {}: expected key = value", i + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::InvalidConfig(format!("override {s:?} is not key=value")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AnonymizationMethod {
    #[default]
    Synthesis,
    ShiftScale,
}

impl FromStr for AnonymizationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "synthesis" => Ok(Self::Synthesis),
            "shift_scale" => Ok(Self::ShiftScale),
            o => Err(Error::InvalidConfig(format!("unknown anonymization method {o:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnonymizeSettings {
    pub selection: SelectionParams,
    pub method: AnonymizationMethod,
    pub mode: ContrastiveMode,
    pub domain: F0Domain,
    pub rho_threshold: f64,
}

impl Default for AnonymizeSettings {
    fn default() -> Self {
        Self {
            selection: SelectionParams::default(),
            method: AnonymizationMethod::Synthesis,
            mode: ContrastiveMode::Ours,
            domain: F0Domain::Linear,
            rho_threshold: crate::metrics::RHO_F0_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Paths {
    pub train_manifest: Option<PathBuf>,
    pub valid_manifest: Option<PathBuf>,
    pub test_manifest: Option<PathBuf>,
    pub input_manifest: Option<PathBuf>,
    pub pool: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    /// Directory of `<utt_id>.f0` files evaluated instead of model output.
    pub pred_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub hidden_sizes: Vec<usize>,
    pub dropout: f64,
    pub train: TrainConfig,
    pub anonymize: AnonymizeSettings,
    pub paths: Paths,
    pub synth: SynthSpec,
    /// Utterances per speaker held out for validation by `synthgen`.
    pub synth_valid_utts: usize,
    pub eval_dataset: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: None,
            hidden_sizes: DEFAULT_HIDDEN.to_vec(),
            dropout: 0.0,
            train: TrainConfig::default(),
            anonymize: AnonymizeSettings::default(),
            paths: Paths::default(),
            synth: SynthSpec::default(),
            synth_valid_utts: 2,
            eval_dataset: "test".into(),
        }
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::InvalidConfig(format!("{key}: cannot parse {v:?}")))
}

impl RunConfig {
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let mut c = RunConfig::default();
        for (k, v) in map {
            c.set(k, v)?;
        }
        c.train.seed = c.seed;
        c.synth.seed = c.seed;
        Ok(c)
    }

    /// Reads an optional config file and applies overrides on top.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut map = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                parse_key_values(&text)?
            }
            None => BTreeMap::new(),
        };
        for (k, v) in overrides {
            map.insert(k.clone(), v.clone());
        }
        Self::from_map(&map)
    }

    pub fn model_config(&self, input_dim: usize) -> ModelConfig {
        ModelConfig {
            input_dim,
            hidden_sizes: self.hidden_sizes.clone(),
            dropout: self.dropout,
        }
    }

    fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let path = |v: &str| Some(PathBuf::from(v));
        match key {
            "seed" => self.seed = num(key, v)?,
            "out_dir" => self.out_dir = path(v),
            "model.hidden_sizes" => {
                self.hidden_sizes = v.split(',').map(|s| num(key, s.trim())).collect::<Result<_>>()?
            }
            "model.dropout" => self.dropout = num(key, v)?,
            "train.alpha" => self.train.alpha = num(key, v)?,
            "train.lr" => self.train.lr = num(key, v)?,
            "train.batch_size" => self.train.batch_size = num(key, v)?,
            "train.patience_lr" => self.train.patience_lr = num(key, v)?,
            "train.lr_factor" => self.train.lr_factor = num(key, v)?,
            "train.patience_stop" => self.train.patience_stop = num(key, v)?,
            "train.max_epochs" => self.train.max_epochs = num(key, v)?,
            "anonymize.n" => self.anonymize.selection.n = num(key, v)?,
            "anonymize.k" => self.anonymize.selection.k = num(key, v)?,
            "anonymize.gender_mode" => self.anonymize.selection.gender_mode = GenderMode::from_str(v)?,
            "anonymize.distance" => self.anonymize.selection.distance = Distance::from_str(v)?,
            "anonymize.method" => self.anonymize.method = v.parse()?,
            "anonymize.mode" => self.anonymize.mode = v.parse()?,
            "anonymize.domain" => self.anonymize.domain = v.parse()?,
            "anonymize.rho_threshold" => self.anonymize.rho_threshold = num(key, v)?,
            "paths.train_manifest" => self.paths.train_manifest = path(v),
            "paths.valid_manifest" => self.paths.valid_manifest = path(v),
            "paths.test_manifest" => self.paths.test_manifest = path(v),
            "paths.input_manifest" => self.paths.input_manifest = path(v),
            "paths.pool" => self.paths.pool = path(v),
            "paths.checkpoint" => self.paths.checkpoint = path(v),
            "paths.pred_dir" => self.paths.pred_dir = path(v),
            "synth.n_speakers_per_gender" => self.synth.n_speakers_per_gender = num(key, v)?,
            "synth.utts_per_speaker" => self.synth.utts_per_speaker = num(key, v)?,
            "synth.frames_per_utt" => self.synth.frames_per_utt = num(key, v)?,
            "synth.d_bn" => self.synth.d_bn = num(key, v)?,
            "synth.d_xv" => self.synth.d_xv = num(key, v)?,
            "synth.base_f0_female" => self.synth.base_f0_female = num(key, v)?,
            "synth.base_f0_male" => self.synth.base_f0_male = num(key, v)?,
            "synth.weight_scale" => self.synth.weight_scale = num(key, v)?,
            "synth.voicing_threshold" => self.synth.voicing_threshold = num(key, v)?,
            "synth.noise_std_cents" => self.synth.noise_std_cents = num(key, v)?,
            "synth.valid_utts_per_speaker" => self.synth_valid_utts = num(key, v)?,
            "eval.dataset" => self.eval_dataset = v.to_string(),
            other => return Err(Error::InvalidConfig(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }
}
