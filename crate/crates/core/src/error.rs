use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported wav encoding: {0}")]
    UnsupportedWav(String),

    #[error("empty audio in {0}")]
    EmptyAudio(PathBuf),

    #[error("sample rate {got} Hz differs from required {want} Hz (resampling not requested)")]
    SampleRateMismatch { got: u32, want: u32 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("signal has zero power: {0}")]
    ZeroPower(String),

    #[error("audio too short: {got} samples, need at least {need}")]
    AudioTooShort { got: usize, need: usize },

    #[error("too few frames: {got}, the network stack needs at least {need}")]
    TooFewFrames { got: usize, need: usize },

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("config hash mismatch: {0}")]
    ConfigHashMismatch(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
