use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("bad magic in {0}: expected {1:?}")]
    BadMagic(String, &'static str),

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),

    #[error("truncated payload: {0}")]
    Truncated(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("negative F0 value {value} at frame {frame}")]
    NegativeF0 { frame: usize, value: f32 },

    #[error("frame alignment error in utterance {utt_id}: {f0_len} F0 frames vs {bn_rows} BN rows")]
    FrameAlignment {
        utt_id: String,
        f0_len: usize,
        bn_rows: usize,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("duplicate utterance id {0}")]
    DuplicateUttId(String),

    #[error("duplicate speaker id {0}")]
    DuplicateSpeakerId(String),

    #[error("unknown gender token {0:?}")]
    UnknownGender(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("no voiced frames")]
    NoVoicedFrames,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("insufficient pool: need {needed} entries of gender {gender}, have {available}")]
    InsufficientPool {
        gender: char,
        needed: usize,
        available: usize,
    },

    #[error("unknown speaker id {0}")]
    UnknownSpeaker(String),

    #[error("speaker {0} has fewer than 2 voiced frames")]
    TooFewVoiced(String),

    #[error("degenerate statistics: {0}")]
    DegenerateStats(String),

    #[error("missing pseudo speaker for mode {0}")]
    MissingPseudo(String),

    #[error("cache does not match parameters: {0}")]
    CacheMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
