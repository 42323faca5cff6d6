use std::io;

use thiserror::Error;

/// Errors produced by the engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("unknown layer `{name}` (valid layers: {})", valid.join(", "))]
    UnknownLayer { name: String, valid: Vec<String> },
    #[error("layer `{layer}`: {reason}")]
    Layer { layer: String, reason: String },
    #[error("format error: {0}")]
    Format(String),
    #[error("truncated file at record {record}: {reason}")]
    Truncated { record: usize, reason: String },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("missing forward cache: {0}")]
    MissingCache(String),
    #[error("training diverged at iteration {iter}: loss = {loss}")]
    Diverged { iter: usize, loss: f64 },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
