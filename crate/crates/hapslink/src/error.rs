use std::fmt;

/// Errors surfaced by the simulator library.
#[derive(Debug)]
pub enum SimError {
    /// Input length does not match what the operation requires.
    LengthMismatch { expected: usize, got: usize },
    /// 4-QAM maps two bits per symbol; an odd bit count cannot be mapped.
    OddBitCount(usize),
    /// Transform length must be a power of two.
    NotPowerOfTwo(usize),
    /// Configuration violates a documented invariant.
    InvalidConfig(String),
    /// A pilot with zero amplitude cannot be divided out.
    ZeroPilot(usize),
    /// The correlation angle is undefined for all-zero preamble halves.
    DegenerateAngle,
    /// Interpolation needs at least two pilots.
    TooFewPilots(usize),
    /// Tensor or layer dimensions are incompatible.
    ShapeMismatch(String),
    /// Training requires a non-empty dataset.
    EmptyDataset,
    /// A CNN estimator was requested without its model files.
    MissingModel(String),
    /// Persistence format problem: bad magic, wrong version or truncation.
    FileFormat(String),
    /// Underlying I/O failure.
    Io(std::io::Error),
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::LengthMismatch { expected, got } => {
                write!(f, "length mismatch: expected {expected}, got {got}")
            }
            SimError::OddBitCount(n) => write!(f, "odd bit count {n}; 4-QAM needs bit pairs"),
            SimError::NotPowerOfTwo(n) => write!(f, "transform length {n} is not a power of two"),
            SimError::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            SimError::ZeroPilot(k) => write!(f, "pilot {k} has zero amplitude"),
            SimError::DegenerateAngle => write!(f, "correlation angle undefined for zero input"),
            SimError::TooFewPilots(n) => write!(f, "interpolation needs >= 2 pilots, got {n}"),
            SimError::ShapeMismatch(msg) => write!(f, "shape mismatch: {msg}"),
            SimError::EmptyDataset => write!(f, "dataset is empty"),
            SimError::MissingModel(which) => write!(f, "missing model: {which}"),
            SimError::FileFormat(msg) => write!(f, "file format error: {msg}"),
            SimError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for SimError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            SimError::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for SimError {
    fn from(e: std::io::Error) -> Self {
        SimError::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
