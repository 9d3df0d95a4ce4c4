use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit index {index} out of range for {n}-qubit register")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("control and target both refer to qubit {0}")]
    ControlIsTarget(usize),

    #[error("rotation gate {0:?} requires an angle")]
    MissingAngle(crate::quantum::GateKind),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid quantum state: {0}")]
    InvalidState(String),

    #[error("matrix is not positive semidefinite (minimum eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error(
        "Bloch vector does not describe a physical state (minimum eigenvalue {min_eigenvalue:e})"
    )]
    NonPhysicalBloch { min_eigenvalue: f64 },

    #[error("Pauli coefficient {index} has imaginary residue {residue:e}")]
    ImaginaryResidue { index: usize, residue: f64 },

    #[error("unsupported qubit count {n}: {reason}")]
    UnsupportedQubitCount { n: usize, reason: &'static str },

    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("parameter vector has length {found}, architecture expects {expected}")]
    ParameterLength { expected: usize, found: usize },

    #[error("invalid probabilities p0={p0}, p1={p1}")]
    InvalidProbabilities { p0: f64, p1: f64 },

    #[error("value {value} outside allowed range {range}")]
    OutOfRange { value: f64, range: &'static str },

    #[error("state cannot be classified (p0={p0}, p1={p1}, epsilon={epsilon})")]
    Unclassifiable { p0: f64, p1: f64, epsilon: f64 },

    #[error("cannot normalize an all-zero vector")]
    ZeroVector,

    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("bad magic number {found:#010x} (expected {expected:#010x})")]
    BadMagic { expected: u32, found: u32 },

    #[error(
        "truncated input: needed {needed} bytes at offset {offset}, only {available} available"
    )]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },

    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },

    #[error("unsupported image geometry {rows}x{cols} (expected 28x28)")]
    ImageGeometry { rows: usize, cols: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("model file: {0}")]
    Model(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
