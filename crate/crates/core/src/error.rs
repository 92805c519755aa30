use std::io;

use thiserror::Error;

use crate::layer::LayerKind;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("bad layer file: {0}")]
    Format(String),

    #[error("layer file truncated: expected {expected} more bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("expected a {expected:?} layer, found {found:?}")]
    WrongLayerKind { expected: LayerKind, found: LayerKind },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("ply: {0}")]
    Ply(String),

    #[error("viewpoint sampling failed after {attempts} attempts ({accepted} of {requested} accepted)")]
    SamplingFailed {
        attempts: usize,
        accepted: usize,
        requested: usize,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
