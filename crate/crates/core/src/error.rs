//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Error, Debug)]
pub enum Error {
    #[error("duplicate field name `{0}`")]
    DuplicateField(String),

    #[error("empty field name")]
    EmptyField,

    #[error("non-positive leading extent {0}")]
    NonPositiveExtent(usize),

    #[error("structure mismatch: {0}")]
    StructureMismatch(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("element kind mismatch: expected {expected}, got {got}")]
    KindMismatch { expected: String, got: String },

    #[error("index {index} out of range for dim of extent {extent}")]
    IndexOutOfRange { index: usize, extent: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("environment error at (t={t}, b={b}): {msg}")]
    EnvStep { t: usize, b: usize, msg: String },

    #[error("invalid action: {0}")]
    InvalidAction(String),

    #[error("worker {0} died: {1}")]
    WorkerDied(usize, String),

    #[error("replay buffer: {0}")]
    Replay(String),

    #[error("prefix {prefix} out of range for total {total}")]
    PrefixOutOfRange { prefix: f64, total: f64 },

    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("learner parameter divergence: {0}")]
    LearnerDivergence(String),

    #[error("checksum mismatch on consumed batch {0}")]
    ChecksumMismatch(u64),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
