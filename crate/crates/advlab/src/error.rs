//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // ── tensor / tape ────────────────────────────────────────────────
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: unsupported shape {shape:?} ({reason})")]
    BadShape {
        op: &'static str,
        shape: Vec<usize>,
        reason: String,
    },
    #[error("data length {len} does not match shape {shape:?}")]
    LengthMismatch { shape: Vec<usize>, len: usize },
    #[error("temperature must be strictly positive, got {0}")]
    BadTemperature(f64),
    #[error("backward requires a scalar output, got shape {0:?}")]
    NonScalarOutput(Vec<usize>),

    // ── models ───────────────────────────────────────────────────────
    #[error("invalid model spec: {0}")]
    BadModelSpec(String),
    #[error("penultimate features require at least two layers ending in a dense layer")]
    NoPenultimate,
    #[error("parameter set does not match model spec: {0}")]
    ParamMismatch(String),

    // ── losses / attacks / training ──────────────────────────────────
    #[error("invalid loss spec: {0}")]
    BadLossSpec(String),
    #[error("label {label} out of range for {classes} classes (sample {index})")]
    LabelRange {
        index: usize,
        label: usize,
        classes: usize,
    },
    #[error("probability rows must sum to 1 (row {row} sums to {sum})")]
    NotNormalized { row: usize, sum: f64 },
    #[error("invalid attack config: {0}")]
    BadAttackConfig(String),
    #[error("invalid train config: {0}")]
    BadTrainConfig(String),
    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Diverged {
        epoch: usize,
        batch: usize,
        loss: f64,
    },
    #[error("weight average has absorbed no checkpoints")]
    EmptyAverage,

    // ── datasets and file formats ────────────────────────────────────
    #[error("empty dataset")]
    EmptyDataset,
    #[error("invalid dataset parameters: {0}")]
    BadDatasetParams(String),
    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: Vec<u8> },
    #[error("unsupported format version {0}")]
    BadVersion(u32),
    #[error("truncated payload: needed {needed} bytes, had {have}")]
    Truncated { needed: usize, have: usize },
    #[error("{0} trailing bytes after payload")]
    TrailingBytes(usize),
    #[error("label {label} out of range at sample {index}")]
    LabelOutOfRange { index: usize, label: u32 },
    #[error("pixel {value} outside [0,1] at offset {index}")]
    PixelOutOfRange { index: usize, value: f32 },
    #[error("malformed record in checkpoint: {0}")]
    BadCheckpoint(String),

    // ── config / metrics / CLI ───────────────────────────────────────
    #[error("config line {line}: {reason}")]
    BadConfig { line: usize, reason: String },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("missing config key `{0}`")]
    MissingKey(String),
    #[error("referenced file does not exist: {0}")]
    MissingFile(String),
    #[error("output directory is locked by another run: {0}")]
    Locked(String),
    #[error("malformed metrics stream: {0}")]
    BadMetrics(String),
    #[error("empty epoch log")]
    EmptyLog,

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
