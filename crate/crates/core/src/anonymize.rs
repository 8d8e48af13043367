//! Pool-based pseudo-speaker selection, the per-speaker F0 statistics
//! dictionary with shift-and-scale modification, and contrastive routing of
//! original/anonymized x-vectors.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::featureio::{read_tensor, Dataset, FeatureTensor, Gender};
use crate::rng::seeded_rng;

/// Mean and population standard deviation of voiced F0, in Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct F0Stats {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolEntry {
    pub speaker_id: String,
    pub gender: Gender,
    pub xvec: Vec<f64>,
    pub stats: F0Stats,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpeakerPool {
    entries: Vec<PoolEntry>,
}

impl SpeakerPool {
    pub fn new(entries: Vec<PoolEntry>) -> Result<Self> {
        let mut ids = HashSet::new();
        let dim = entries.first().map(|e| e.xvec.len());
        for e in &entries {
            if !ids.insert(e.speaker_id.as_str()) {
                return Err(Error::DuplicateSpeakerId(e.speaker_id.clone()));
            }
            if Some(e.xvec.len()) != dim {
                return Err(Error::DimensionMismatch(format!(
                    "pool entry {} has a {}-dim x-vector",
                    e.speaker_id,
                    e.xvec.len()
                )));
            }
            if !(e.stats.mean > 0.0 && e.stats.std > 0.0) {
                return Err(Error::DegenerateStats(format!(
                    "speaker {}: mean {} std {} (both must be positive)",
                    e.speaker_id, e.stats.mean, e.stats.std
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[PoolEntry] {
        &self.entries
    }

    pub fn get(&self, speaker_id: &str) -> Option<&PoolEntry> {
        self.entries.iter().find(|e| e.speaker_id == speaker_id)
    }

    pub fn count(&self, gender: Gender) -> usize {
        self.entries.iter().filter(|e| e.gender == gender).count()
    }

    /// One entry per speaker: the mean x-vector over the speaker's
    /// utterances and pooled voiced F0 statistics.
    pub fn from_dataset(dataset: &Dataset) -> Result<Self> {
        let stats = speaker_f0_stats(dataset)?;
        let mut xvecs: BTreeMap<&str, (Gender, Vec<f64>, usize)> = BTreeMap::new();
        for u in dataset.utterances() {
            let e = xvecs
                .entry(u.speaker_id())
                .or_insert_with(|| (u.gender(), vec![0.0; u.xvec().len()], 0));
            e.1.iter_mut().zip(u.xvec()).for_each(|(a, &x)| *a += x as f64);
            e.2 += 1;
        }
        let entries = xvecs
            .into_iter()
            .map(|(id, (gender, sum, n))| PoolEntry {
                speaker_id: id.to_string(),
                gender,
                xvec: sum.into_iter().map(|v| v / n as f64).collect(),
                stats: stats[id],
            })
            .collect();
        Self::new(entries)
    }
}

pub const POOL_HEADER: &str = "speaker_id,gender,xvec_path,f0_mean,f0_std";

/// Loads a pool CSV (`speaker_id,gender,xvec_path,f0_mean,f0_std`); x-vector
/// paths resolve against the CSV's directory.
pub fn load_pool(path: &Path) -> Result<SpeakerPool> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut reader = csv::ReaderBuilder::new()
        .quoting(false)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header = reader
        .headers()
        .map_err(|e| Error::Manifest(e.to_string()))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if header != POOL_HEADER {
        return Err(Error::Manifest(format!(
            "{}: expected header {POOL_HEADER:?}, got {header:?}",
            path.display()
        )));
    }
    let mut entries = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Manifest(e.to_string()))?;
        if rec.len() != 5 {
            return Err(Error::Manifest(format!("pool row has {} fields", rec.len())));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::Manifest(format!("bad number {s:?} in pool file")))
        };
        let xpath = base.join(&rec[2]);
        let xv = read_tensor(&xpath)?;
        entries.push(PoolEntry {
            speaker_id: rec[0].to_string(),
            gender: rec[1].parse()?,
            xvec: xv.data.iter().map(|&v| v as f64).collect(),
            stats: F0Stats {
                mean: parse(&rec[3])?,
                std: parse(&rec[4])?,
            },
        });
    }
    SpeakerPool::new(entries)
}

/// Writes a pool CSV plus one x-vector file per speaker under `xvec_dir`
/// (given relative to the CSV's directory).
pub fn write_pool(path: &Path, xvec_dir: &str, pool: &SpeakerPool) -> Result<()> {
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let dir = base.join(xvec_dir);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut text = format!("{POOL_HEADER}\n");
    for e in &pool.entries {
        let rel = format!("{xvec_dir}/{}.xvec", e.speaker_id);
        crate::featureio::write_tensor(
            &base.join(&rel),
            &FeatureTensor::vector(e.xvec.iter().map(|&v| v as f32).collect()),
        )?;
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            e.speaker_id, e.gender, rel, e.stats.mean, e.stats.std
        ));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Distance between a source x-vector and a pool x-vector; larger is further.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Distance {
    /// `1 − cos(a, b)`
    #[default]
    Cosine,
    Euclidean,
}

impl Distance {
    pub fn eval(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Distance::Cosine => cosine_distance(a, b),
            Distance::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt(),
        }
    }
}

impl FromStr for Distance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(Distance::Cosine),
            "euclidean" => Ok(Distance::Euclidean),
            o => Err(Error::InvalidConfig(format!("unknown distance {o:?}"))),
        }
    }
}

/// `1 − cos(a, b)`; a zero vector is treated as orthogonal to everything.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    1.0 - dot / (na * nb)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenderMode {
    Same,
    Opposite,
}

impl GenderMode {
    pub fn target(self, source: Gender) -> Gender {
        match self {
            GenderMode::Same => source,
            GenderMode::Opposite => source.opposite(),
        }
    }
}

impl FromStr for GenderMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "same" => Ok(GenderMode::Same),
            "opposite" => Ok(GenderMode::Opposite),
            o => Err(Error::InvalidConfig(format!("unknown gender mode {o:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionParams {
    pub gender_mode: GenderMode,
    /// Size of the furthest-candidate set.
    pub n: usize,
    /// Members averaged into the pseudo speaker.
    pub k: usize,
    pub distance: Distance,
}

impl Default for SelectionParams {
    fn default() -> Self {
        Self {
            gender_mode: GenderMode::Same,
            n: 200,
            k: 100,
            distance: Distance::Cosine,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoSpeaker {
    pub xvec: Vec<f64>,
    /// In selection order.
    pub chosen_ids: Vec<String>,
    pub stats: F0Stats,
}

/// The `n` target-gender entries furthest from `source_xvec`, ties broken by
/// ascending speaker id. Returned in ranking order.
pub fn candidate_set<'a>(
    pool: &'a SpeakerPool,
    source_xvec: &[f64],
    target: Gender,
    n: usize,
    distance: Distance,
) -> Result<Vec<&'a PoolEntry>> {
    let mut scored: Vec<(f64, &PoolEntry)> = pool
        .entries
        .iter()
        .filter(|e| e.gender == target)
        .map(|e| (distance.eval(source_xvec, &e.xvec), e))
        .collect();
    if scored.len() < n {
        return Err(Error::InsufficientPool {
            gender: target.as_char(),
            needed: n,
            available: scored.len(),
        });
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.speaker_id.cmp(&b.1.speaker_id)));
    Ok(scored.into_iter().take(n).map(|(_, e)| e).collect())
}

/// Builds a pseudo speaker: rank the target-gender pool by distance, keep the
/// furthest `n`, draw `k` of them uniformly without replacement and average
/// their x-vectors and F0 statistics.
pub fn select_pseudo_speaker(
    pool: &SpeakerPool,
    source_xvec: &[f64],
    source_gender: Gender,
    params: &SelectionParams,
    seed: u64,
) -> Result<PseudoSpeaker> {
    if params.k == 0 || params.k > params.n {
        return Err(Error::InvalidConfig(format!(
            "need 1 <= K <= N, got K={} N={}",
            params.k, params.n
        )));
    }
    if let Some(e) = pool.entries.first() {
        if e.xvec.len() != source_xvec.len() {
            return Err(Error::DimensionMismatch(format!(
                "source x-vector has {} dims, pool uses {}",
                source_xvec.len(),
                e.xvec.len()
            )));
        }
    }
    let target = params.gender_mode.target(source_gender);
    let mut candidates = candidate_set(pool, source_xvec, target, params.n, params.distance)?;
    let mut rng = seeded_rng(seed);
    let (chosen, _) = candidates.partial_shuffle(&mut rng, params.k);

    let k = chosen.len() as f64;
    let mut xvec = vec![0.0; source_xvec.len()];
    for e in chosen.iter() {
        xvec.iter_mut().zip(&e.xvec).for_each(|(a, &x)| *a += x);
    }
    xvec.iter_mut().for_each(|a| *a /= k);
    let chosen_ids: Vec<String> = chosen.iter().map(|e| e.speaker_id.clone()).collect();
    let stats = pseudo_target_stats(pool, &chosen_ids)?;
    Ok(PseudoSpeaker {
        xvec,
        chosen_ids,
        stats,
    })
}

/// Mean and population std of voiced F0 per speaker, pooled across that
/// speaker's utterances.
pub fn speaker_f0_stats(dataset: &Dataset) -> Result<BTreeMap<String, F0Stats>> {
    let mut voiced: HashMap<&str, Vec<f64>> = HashMap::new();
    for u in dataset.utterances() {
        voiced
            .entry(u.speaker_id())
            .or_default()
            .extend(u.f0().iter().filter(|&&v| v > 0.0).map(|&v| v as f64));
    }
    voiced
        .into_iter()
        .map(|(id, values)| {
            if values.len() < 2 {
                return Err(Error::TooFewVoiced(id.to_string()));
            }
            Ok((id.to_string(), trajectory_stats(&values)))
        })
        .collect()
}

/// Population mean/std of the given (voiced) values.
pub fn trajectory_stats(values: &[f64]) -> F0Stats {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    F0Stats { mean, std: var.sqrt() }
}

/// Arithmetic means of the chosen members' means and stds.
pub fn pseudo_target_stats(pool: &SpeakerPool, chosen_ids: &[String]) -> Result<F0Stats> {
    if chosen_ids.is_empty() {
        return Err(Error::InvalidArgument("no speakers chosen".into()));
    }
    let mut mean = 0.0;
    let mut std = 0.0;
    for id in chosen_ids {
        let e = pool.get(id).ok_or_else(|| Error::UnknownSpeaker(id.clone()))?;
        mean += e.stats.mean;
        std += e.stats.std;
    }
    let k = chosen_ids.len() as f64;
    Ok(F0Stats {
        mean: mean / k,
        std: std / k,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum F0Domain {
    #[default]
    Linear,
    /// Statistics are moment-matched to log-normal parameters and the affine
    /// map is applied to ln F0.
    Log,
}

impl FromStr for F0Domain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(F0Domain::Linear),
            "log" => Ok(F0Domain::Log),
            o => Err(Error::InvalidConfig(format!("unknown F0 domain {o:?}"))),
        }
    }
}

/// Floor applied to mapped voiced frames so they stay voiced.
pub const MIN_MAPPED_F0_HZ: f64 = 1.0;

fn log_moments(s: F0Stats) -> F0Stats {
    let var = (1.0 + (s.std / s.mean).powi(2)).ln();
    F0Stats {
        mean: s.mean.ln() - var / 2.0,
        std: var.sqrt(),
    }
}

/// Maps voiced frames from source to target statistics; unvoiced frames stay 0.
pub fn shift_scale_f0(f0: &[f64], src: F0Stats, tgt: F0Stats, domain: F0Domain) -> Result<Vec<f64>> {
    if src.std.is_nan() || src.std <= 0.0 {
        return Err(Error::DegenerateStats(format!(
            "source std must be positive, got {}",
            src.std
        )));
    }
    if domain == F0Domain::Log && !(src.mean > 0.0 && tgt.mean > 0.0) {
        return Err(Error::DegenerateStats("log-domain mapping needs positive means".into()));
    }
    let map = |x: f64| -> f64 {
        match domain {
            F0Domain::Linear => (x - src.mean) / src.std * tgt.std + tgt.mean,
            F0Domain::Log => {
                let (s, t) = (log_moments(src), log_moments(tgt));
                ((x.ln() - s.mean) / s.std * t.std + t.mean).exp()
            }
        }
    };
    Ok(f0
        .iter()
        .map(|&x| if x > 0.0 { map(x).max(MIN_MAPPED_F0_HZ) } else { 0.0 })
        .collect())
}

/// Which x-vector feeds the F0 synthesizer and which is exported as the
/// output identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContrastiveMode {
    /// anonymized / anonymized
    Ours,
    /// original / original
    C1,
    /// anonymized / original
    C2,
    /// original / anonymized
    C3,
}

impl ContrastiveMode {
    pub fn needs_pseudo(self) -> bool {
        self != ContrastiveMode::C1
    }
}

impl fmt::Display for ContrastiveMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ContrastiveMode::Ours => "ours",
            ContrastiveMode::C1 => "c1",
            ContrastiveMode::C2 => "c2",
            ContrastiveMode::C3 => "c3",
        })
    }
}

impl FromStr for ContrastiveMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ours" => Ok(ContrastiveMode::Ours),
            "c1" => Ok(ContrastiveMode::C1),
            "c2" => Ok(ContrastiveMode::C2),
            "c3" => Ok(ContrastiveMode::C3),
            o => Err(Error::InvalidConfig(format!("unknown contrastive mode {o:?}"))),
        }
    }
}

/// Returns `(synth_xvec, export_xvec)`.
pub fn assemble_synthesis_inputs(
    mode: ContrastiveMode,
    pseudo: Option<&PseudoSpeaker>,
    source_xvec: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let anon = || {
        pseudo
            .map(|p| p.xvec.clone())
            .ok_or_else(|| Error::MissingPseudo(mode.to_string()))
    };
    let orig = || source_xvec.to_vec();
    Ok(match mode {
        ContrastiveMode::Ours => (anon()?, anon()?),
        ContrastiveMode::C1 => (orig(), orig()),
        ContrastiveMode::C2 => (anon()?, orig()),
        ContrastiveMode::C3 => (orig(), anon()?),
    })
}
