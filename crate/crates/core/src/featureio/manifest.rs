//! CSV manifest: `utt_id,speaker_id,gender,f0_path,bn_path,xvec_path`.
//!
//! Relative paths resolve against the manifest's directory.

use std::fs::File;
use std::path::{Path, PathBuf};

use super::{read_utterance, Dataset, FeatureDims, Gender, Role, UtteranceMeta};
use crate::error::{Error, Result};

pub const MANIFEST_HEADER: [&str; 6] = ["utt_id", "speaker_id", "gender", "f0_path", "bn_path", "xvec_path"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    pub utt_id: String,
    pub speaker_id: String,
    pub gender: Gender,
    pub f0_path: PathBuf,
    pub bn_path: PathBuf,
    pub xvec_path: PathBuf,
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

pub(crate) fn read_manifest_rows(path: &Path) -> Result<Vec<ManifestRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .quoting(false)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header = reader
        .headers()
        .map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?
        .clone();
    if header.iter().collect::<Vec<_>>() != MANIFEST_HEADER {
        return Err(Error::Manifest(format!(
            "{}: expected header {:?}, got {:?}",
            path.display(),
            MANIFEST_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Manifest(format!("{}: {e}", path.display())))?;
        if record.len() != 6 {
            return Err(Error::Manifest(format!(
                "{} line {}: expected 6 fields, got {}",
                path.display(),
                i + 2,
                record.len()
            )));
        }
        rows.push(ManifestRow {
            utt_id: record[0].to_string(),
            speaker_id: record[1].to_string(),
            gender: record[2].parse()?,
            f0_path: resolve(base, &record[3]),
            bn_path: resolve(base, &record[4]),
            xvec_path: resolve(base, &record[5]),
        });
    }
    Ok(rows)
}

/// Loads and validates every utterance referenced by a manifest, in manifest
/// order. When `expected` is given, every utterance must match those dims.
pub fn load_manifest(path: &Path, role: Role, expected: Option<FeatureDims>) -> Result<Dataset> {
    let rows = read_manifest_rows(path)?;
    let mut utterances = Vec::with_capacity(rows.len());
    for row in rows {
        let meta = UtteranceMeta {
            utt_id: row.utt_id,
            speaker_id: row.speaker_id,
            gender: row.gender,
        };
        let utt = read_utterance(&row.f0_path, &row.bn_path, &row.xvec_path, meta)?;
        if let Some(dims) = expected {
            if utt.dims() != dims {
                return Err(Error::DimensionMismatch(format!(
                    "utterance {}: file dims {:?}, expected {:?}",
                    utt.utt_id(),
                    utt.dims(),
                    dims
                )));
            }
        }
        utterances.push(utt);
    }
    Dataset::new(role, utterances)
}

/// Writes a manifest. Paths are written as given (relative paths stay relative).
pub fn write_manifest(path: &Path, rows: &[ManifestRow]) -> Result<()> {
    let mut text = MANIFEST_HEADER.join(",");
    text.push('\n');
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.utt_id,
            r.speaker_id,
            r.gender,
            r.f0_path.display(),
            r.bn_path.display(),
            r.xvec_path.display()
        ));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes every utterance as three feature files under `dir/feats_subdir`
/// plus a manifest `dir/manifest_name` with relative paths. Returns the
/// manifest path.
pub fn write_dataset(dataset: &Dataset, dir: &Path, feats_subdir: &str, manifest_name: &str) -> Result<PathBuf> {
    let feats = dir.join(feats_subdir);
    std::fs::create_dir_all(&feats).map_err(|e| Error::io(&feats, e))?;
    let mut rows = Vec::with_capacity(dataset.len());
    for u in dataset.utterances() {
        let rel = |ext: &str| PathBuf::from(feats_subdir).join(format!("{}.{ext}", u.utt_id()));
        let row = ManifestRow {
            utt_id: u.utt_id().to_string(),
            speaker_id: u.speaker_id().to_string(),
            gender: u.gender(),
            f0_path: rel("f0"),
            bn_path: rel("bn"),
            xvec_path: rel("xvec"),
        };
        super::write_utterance(
            u,
            &dir.join(&row.f0_path),
            &dir.join(&row.bn_path),
            &dir.join(&row.xvec_path),
        )?;
        rows.push(row);
    }
    let path = dir.join(manifest_name);
    write_manifest(&path, &rows)?;
    Ok(path)
}
