//! Error types shared across the crate.

use std::path::PathBuf;

use thiserror::Error;

use crate::pipeline::Fingerprint;

/// Failure to turn raw bytes into a raster.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("malformed header at byte {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error("truncated payload: expected {expected} bytes after offset {offset}, found {found}")]
    Truncated {
        offset: usize,
        expected: usize,
        found: usize,
    },
    #[error("unsupported image: {0}")]
    Unsupported(String),
    #[error("codec error: {0}")]
    Codec(String),
}

/// Grid geometry that an operation cannot accept.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ShapeError {
    #[error("sample count {len} does not match {width}x{height}")]
    SampleCount {
        width: usize,
        height: usize,
        len: usize,
    },
    #[error("grid dimensions must be positive, got {width}x{height}")]
    Empty { width: usize, height: usize },
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    Mismatch(usize, usize, usize, usize),
    #[error("grid {width}x{height} is too small: {reason}")]
    TooSmall {
        width: usize,
        height: usize,
        reason: String,
    },
    #[error("cannot fuse code maps: {0}")]
    Fusion(String),
}

/// Invalid parameter combination.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("invalid parameter `{name}`: {reason}")]
    Invalid { name: &'static str, reason: String },
}

impl ConfigError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            name,
            reason: reason.into(),
        }
    }
}

/// Two vectors that must not be compared.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum CompareError {
    #[error("dimension mismatch: {0} vs {1}")]
    Dim(usize, usize),
    #[error("fingerprint mismatch: {expected} vs {found}")]
    Fingerprint {
        expected: Fingerprint,
        found: Fingerprint,
    },
}

/// Problems reading or writing a feature index file.
#[derive(Debug, Error)]
pub enum IndexError {
    #[error("bad magic {0:?}, expected \"DBCR\"")]
    Magic([u8; 4]),
    #[error("unsupported index format version {0}")]
    Version(u16),
    #[error("index truncated at byte {offset} while reading {what}")]
    Truncated { offset: usize, what: &'static str },
    #[error("{0} trailing bytes after the last entry")]
    TrailingData(usize),
    #[error("index fingerprint {found} does not match expected {expected}")]
    Fingerprint {
        expected: Fingerprint,
        found: Fingerprint,
    },
    #[error("entry {id}: {reason}")]
    Entry { id: u32, reason: String },
    #[error("duplicate entry id {0}")]
    DuplicateId(u32),
    #[error(transparent)]
    Compare(#[from] CompareError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Dataset walking failures.
#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read dataset root {path}: {source}")]
    Root {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("walk error: {0}")]
    Walk(String),
    #[error("non-numeric file stems under the wang layout: {}", .0.join(", "))]
    NonNumeric(Vec<String>),
}

/// Benchmark and report assembly failures.
#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("class `{0}` has no queries")]
    EmptyClass(String),
    #[error("index is empty")]
    EmptyIndex,
    #[error("confusion matrix needs at least two classes, found {0}")]
    TooFewClasses(usize),
    #[error("invalid evaluation setting: {0}")]
    Config(String),
}

/// Umbrella error for callers that chain several stages.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Shape(#[from] ShapeError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Compare(#[from] CompareError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
