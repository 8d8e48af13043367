//! Train / evaluate / anonymize workflows behind the `f0synth` binary.
//!
//! Every command writes only under the configured output directory:
//! `checkpoint.f0md`, `history.csv`, `metrics.csv`, `anon_log.csv`,
//! `rho_f0.csv`, `f0_out/<utt_id>.f0`, `xvec_out/<utt_id>.xvec`.

pub mod config;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::anonymize::{
    assemble_synthesis_inputs, load_pool, select_pseudo_speaker, shift_scale_f0, speaker_f0_stats, write_pool,
    ContrastiveMode, SpeakerPool,
};
use crate::error::{Error, Result};
use crate::featureio::{
    build_frame_table, load_manifest, read_tensor, write_dataset, write_manifest, write_tensor, Dataset, FeatureTensor,
    ManifestRow, Role,
};
use crate::metrics::{format_report_row, pitch_correlation, pitch_counts, MetricsReport, PitchCounts, REPORT_HEADER};
use crate::model::{load_checkpoint, predict_f0, save_checkpoint, F0Trajectory};
use crate::synthgen::{derive_seed, generate_synthetic_dataset, split_by_utterance};
use crate::training::train;

pub use config::{AnonymizationMethod, RunConfig};

pub const CHECKPOINT_FILE: &str = "checkpoint.f0md";
pub const HISTORY_FILE: &str = "history.csv";
pub const METRICS_FILE: &str = "metrics.csv";
pub const ANON_LOG_FILE: &str = "anon_log.csv";
pub const RHO_FILE: &str = "rho_f0.csv";
pub const F0_OUT_DIR: &str = "f0_out";
pub const XVEC_OUT_DIR: &str = "xvec_out";

fn out_dir(config: &RunConfig) -> Result<PathBuf> {
    let dir = config
        .out_dir
        .clone()
        .ok_or_else(|| Error::InvalidConfig("out_dir is required".into()))?;
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn required<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    let p = p
        .as_deref()
        .ok_or_else(|| Error::InvalidConfig(format!("{key} is required")))?;
    if !p.exists() {
        return Err(Error::io(p, std::io::Error::from(std::io::ErrorKind::NotFound)));
    }
    Ok(p)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone)]
pub struct SynthgenSummary {
    pub manifest: PathBuf,
    pub train_manifest: PathBuf,
    pub valid_manifest: PathBuf,
    pub pool: PathBuf,
    pub frames: usize,
}

/// Generates a synthetic corpus: `manifest.csv` (all utterances),
/// `train.csv`/`valid.csv` (per-speaker utterance split) and `pool.csv`
/// (speaker pool built from the training split).
pub fn cmd_synthgen(config: &RunConfig) -> Result<SynthgenSummary> {
    let dir = out_dir(config)?;
    let (dataset, _) = generate_synthetic_dataset(&config.synth)?;
    let manifest = write_dataset(&dataset, &dir, "feats", "manifest.csv")?;
    let (train_set, valid_set) = split_by_utterance(&dataset, config.synth_valid_utts)?;
    let rows_for = |ds: &Dataset| -> Vec<ManifestRow> {
        ds.utterances()
            .iter()
            .map(|u| {
                let rel = |ext: &str| PathBuf::from("feats").join(format!("{}.{ext}", u.utt_id()));
                ManifestRow {
                    utt_id: u.utt_id().to_string(),
                    speaker_id: u.speaker_id().to_string(),
                    gender: u.gender(),
                    f0_path: rel("f0"),
                    bn_path: rel("bn"),
                    xvec_path: rel("xvec"),
                }
            })
            .collect()
    };
    let train_manifest = dir.join("train.csv");
    let valid_manifest = dir.join("valid.csv");
    write_manifest(&train_manifest, &rows_for(&train_set))?;
    write_manifest(&valid_manifest, &rows_for(&valid_set))?;
    let pool = dir.join("pool.csv");
    write_pool(&pool, "pool_xvec", &SpeakerPool::from_dataset(&train_set)?)?;
    Ok(SynthgenSummary {
        manifest,
        train_manifest,
        valid_manifest,
        pool,
        frames: dataset.total_frames(),
    })
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub history: PathBuf,
    pub epochs: usize,
    pub best_metric: Option<f64>,
}

pub fn cmd_train(config: &RunConfig) -> Result<TrainSummary> {
    let train_path = required(&config.paths.train_manifest, "paths.train_manifest")?;
    let valid_path = required(&config.paths.valid_manifest, "paths.valid_manifest")?;
    let dir = out_dir(config)?;
    let train_set = load_manifest(train_path, Role::Train, None)?;
    let valid_set = load_manifest(valid_path, Role::Validation, train_set.dims())?;
    let table = build_frame_table(&train_set, Some(config.seed))?;
    let model_config = config.model_config(table.input_dim());
    let (params, history) = train(&table, &valid_set, &model_config, &config.train)?;
    let checkpoint = dir.join(CHECKPOINT_FILE);
    let history_path = dir.join(HISTORY_FILE);
    save_checkpoint(&checkpoint, &params)?;
    history.write_csv(&history_path)?;
    Ok(TrainSummary {
        checkpoint,
        history: history_path,
        epochs: history.epochs.len(),
        best_metric: history.best_metric(),
    })
}

fn checkpoint_path(config: &RunConfig) -> Result<PathBuf> {
    match (&config.paths.checkpoint, &config.out_dir) {
        (Some(p), _) => Ok(p.clone()),
        (None, Some(d)) => Ok(d.join(CHECKPOINT_FILE)),
        (None, None) => Err(Error::InvalidConfig("paths.checkpoint is required".into())),
    }
}

#[derive(Debug, Clone)]
pub struct EvalSummary {
    pub metrics: PathBuf,
    /// `(sex, report)`; sex is `F`, `M` or `all`.
    pub reports: Vec<(String, MetricsReport)>,
}

/// Evaluates model predictions (or the `<utt_id>.f0` files of
/// `paths.pred_dir`) against a reference manifest, per sex and pooled.
pub fn cmd_eval(config: &RunConfig) -> Result<EvalSummary> {
    let test_path = required(&config.paths.test_manifest, "paths.test_manifest")?;
    let test_set = load_manifest(test_path, Role::Test, None)?;
    if test_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let model = match &config.paths.pred_dir {
        Some(_) => None,
        None => {
            let ck = checkpoint_path(config)?;
            if !ck.exists() {
                return Err(Error::io(&ck, std::io::Error::from(std::io::ErrorKind::NotFound)));
            }
            Some(load_checkpoint(&ck)?)
        }
    };
    let dir = out_dir(config)?;

    let mut by_sex: BTreeMap<String, (PitchCounts, Vec<Option<f64>>)> = BTreeMap::new();
    for u in test_set.utterances() {
        let pred: Vec<f64> = match (&model, &config.paths.pred_dir) {
            (Some(params), _) => predict_f0(params, u.input_matrix(None)?.view())?.0.into_inner(),
            (None, Some(pd)) => {
                let t = read_tensor(&pd.join(format!("{}.f0", u.utt_id())))?;
                t.data.iter().map(|&v| v as f64).collect()
            }
            (None, None) => unreachable!(),
        };
        let truth = u.f0_hz();
        let counts = pitch_counts(&pred, &truth)?;
        let rho = pitch_correlation(&pred, &truth)?;
        for key in [u.gender().to_string(), "all".to_string()] {
            let e = by_sex.entry(key).or_default();
            e.0 += counts;
            e.1.push(rho);
        }
    }
    let mut text = format!("{REPORT_HEADER}\n");
    let mut reports = Vec::new();
    for sex in ["F", "M", "all"] {
        if let Some((counts, rhos)) = by_sex.get(sex) {
            let r = MetricsReport::from_parts(*counts, rhos);
            let _ = writeln!(text, "{}", format_report_row(&config.eval_dataset, sex, &r));
            reports.push((sex.to_string(), r));
        }
    }
    let metrics = dir.join(METRICS_FILE);
    write_text(&metrics, &text)?;
    Ok(EvalSummary { metrics, reports })
}

#[derive(Debug, Clone)]
pub struct AnonymizeSummary {
    pub utterances: usize,
    pub frames: usize,
    /// Seconds spent producing output F0 (selection excluded).
    pub synthesis_seconds: f64,
    pub flagged: Vec<String>,
    pub rho: Vec<(String, Option<f64>)>,
}

impl AnonymizeSummary {
    pub fn frames_per_second(&self) -> f64 {
        self.frames as f64 / self.synthesis_seconds.max(1e-12)
    }
}

pub fn cmd_anonymize(config: &RunConfig) -> Result<AnonymizeSummary> {
    let input_path = required(&config.paths.input_manifest, "paths.input_manifest")?;
    let pool_path = required(&config.paths.pool, "paths.pool")?;
    let settings = &config.anonymize;
    let params = match settings.method {
        AnonymizationMethod::Synthesis => {
            let ck = checkpoint_path(config)?;
            if !ck.exists() {
                return Err(Error::InvalidConfig(format!(
                    "synthesis method needs a checkpoint, {} not found",
                    ck.display()
                )));
            }
            Some(load_checkpoint(&ck)?)
        }
        AnonymizationMethod::ShiftScale => None,
    };
    let dataset = load_manifest(input_path, Role::Test, None)?;
    let pool = load_pool(pool_path)?;
    let source_stats = match settings.method {
        AnonymizationMethod::ShiftScale => speaker_f0_stats(&dataset)?,
        AnonymizationMethod::Synthesis => BTreeMap::new(),
    };
    let dir = out_dir(config)?;
    let f0_dir = dir.join(F0_OUT_DIR);
    let xv_dir = dir.join(XVEC_OUT_DIR);
    for d in [&f0_dir, &xv_dir] {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }

    let mut log = String::from("utt_id,mode,chosen_ids,tgt_mean,tgt_std\n");
    let mut rho_csv = String::from("utt_id,rho_f0,flagged\n");
    let mut summary = AnonymizeSummary {
        utterances: dataset.len(),
        frames: 0,
        synthesis_seconds: 0.0,
        flagged: Vec::new(),
        rho: Vec::new(),
    };
    for (i, u) in dataset.utterances().iter().enumerate() {
        let source_xvec: Vec<f64> = u.xvec().iter().map(|&v| v as f64).collect();
        let pseudo = select_pseudo_speaker(
            &pool,
            &source_xvec,
            u.gender(),
            &settings.selection,
            derive_seed(config.seed, i as u64),
        )?;
        let (synth_xvec, export_xvec) = assemble_synthesis_inputs(settings.mode, Some(&pseudo), &source_xvec)?;
        let original = u.f0_hz();

        let start = Instant::now();
        let out: Vec<f64> = match &params {
            Some(p) => predict_f0(p, u.input_matrix(Some(&synth_xvec))?.view())?.0.into_inner(),
            None => {
                let src = source_stats[u.speaker_id()];
                // the synthesizer-side route decides whether F0 is moved
                let tgt = match settings.mode {
                    ContrastiveMode::Ours | ContrastiveMode::C2 => pseudo.stats,
                    ContrastiveMode::C1 | ContrastiveMode::C3 => src,
                };
                shift_scale_f0(&original, src, tgt, settings.domain)?
            }
        };
        summary.synthesis_seconds += start.elapsed().as_secs_f64();
        summary.frames += out.len();

        write_tensor(
            &f0_dir.join(format!("{}.f0", u.utt_id())),
            &FeatureTensor::vector(out.iter().map(|&v| v as f32).collect()),
        )?;
        write_tensor(
            &xv_dir.join(format!("{}.xvec", u.utt_id())),
            &FeatureTensor::vector(export_xvec.iter().map(|&v| v as f32).collect()),
        )?;
        let _ = writeln!(
            log,
            "{},{},{},{},{}",
            u.utt_id(),
            settings.mode,
            pseudo.chosen_ids.join(";"),
            pseudo.stats.mean,
            pseudo.stats.std
        );
        let rho = pitch_correlation(&out, &original)?;
        let flagged = rho_flagged(rho, settings.rho_threshold);
        if flagged {
            summary.flagged.push(u.utt_id().to_string());
        }
        let _ = writeln!(
            rho_csv,
            "{},{},{}",
            u.utt_id(),
            rho.map(|r| r.to_string()).unwrap_or_default(),
            flagged as u8
        );
        summary.rho.push((u.utt_id().to_string(), rho));
    }
    write_text(&dir.join(ANON_LOG_FILE), &log)?;
    write_text(&dir.join(RHO_FILE), &rho_csv)?;
    Ok(summary)
}

/// An utterance fails the pitch-correlation requirement when the
/// correlation is undefined or does not exceed the threshold.
pub fn rho_flagged(rho: Option<f64>, threshold: f64) -> bool {
    rho.is_none_or(|r| r <= threshold)
}

/// Reads an `f0_out` file back as a trajectory.
pub fn read_f0_file(path: &Path) -> Result<F0Trajectory> {
    let t = read_tensor(path)?;
    Ok(F0Trajectory::new(t.data.iter().map(|&v| v as f64).collect()))
}
