use std::path::PathBuf;

use thiserror::Error;

/// Errors produced across the recognition pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("clip has no frames")]
    EmptyClip,
    #[error("actor pose missing in frame position {0}")]
    MissingActor(usize),
    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("extent must be positive (got {width}x{height})")]
    ZeroExtent { width: f64, height: f64 },
    #[error("cannot split {num_frames} frames into {segments} segments")]
    TooFewFrames { num_frames: usize, segments: usize },
    #[error("frame contains no person")]
    NoPerson,
    #[error("object connection requested for the human-only graph")]
    Strategy,
    #[error("every joint is missing; gravity center undefined")]
    DegeneratePose,
    #[error("frame is empty")]
    EmptyFrame,
    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch { expected: (usize, usize), got: (usize, usize) },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("no tracks")]
    NoTrack,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("config error: {0}")]
    Config(String),
    #[error("unsupported checkpoint version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("corrupt checkpoint: {0}")]
    Corruption(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// Process exit code: 1 usage/config, 2 data, 3 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Schema(_)
            | Error::EmptyClip
            | Error::MissingActor(_)
            | Error::IndexOutOfRange { .. }
            | Error::ZeroExtent { .. }
            | Error::TooFewFrames { .. }
            | Error::NoPerson
            | Error::DegeneratePose
            | Error::EmptyFrame
            | Error::DimensionMismatch { .. }
            | Error::NoTrack
            | Error::EmptyDataset
            | Error::Version { .. }
            | Error::Corruption(_)
            | Error::Io { .. } => 2,
            Error::Strategy | Error::ShapeMismatch(_) => 3,
        }
    }
}
