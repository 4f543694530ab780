use thiserror::Error;

/// Errors raised by the saliency pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch in {dim}: expected {expected}, got {got}")]
    Shape {
        op: &'static str,
        dim: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{op}: output extent would be {extent} (< 1) for input {input}")]
    EmptyOutput {
        op: &'static str,
        input: usize,
        extent: i64,
    },

    #[error("{0}")]
    InvalidArgument(String),

    #[error("image too small: {height}x{width}, need at least {min}x{min}")]
    ImageTooSmall { height: usize, width: usize, min: usize },

    #[error("input size {height}x{width} not divisible by {factor}; pad to {padded_h}x{padded_w}")]
    Indivisible {
        height: usize,
        width: usize,
        factor: usize,
        padded_h: usize,
        padded_w: usize,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("checkpoint version mismatch: file has version {found}, this build reads version {expected}")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
