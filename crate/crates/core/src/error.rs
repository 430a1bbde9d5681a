//! Error type shared across the routing engine.

use std::fmt;

/// Failure modes surfaced by the engine. Every variant carries a
/// human-readable message naming the offending record or dimension.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Vector/matrix shapes do not line up.
    Dimension(String),
    /// An adapter has no delta for the requested layer.
    MissingLayer(String),
    /// A file failed to parse.
    Format(String),
    /// An in-memory structure violates an invariant.
    Validation(String),
    /// Underlying I/O failure.
    Io(String),
    /// A referenced task or adapter does not exist.
    NotFound(String),
    /// A task has an empty validation set.
    EmptyTask(String),
    /// Query and catalog were embedded with different encoders.
    EncoderMismatch(String),
    /// The catalog holds no routable tasks.
    EmptyCatalog(String),
    /// An evaluator call failed.
    Evaluation(String),
    /// The adapter pool is empty.
    EmptyPool(String),
    /// The evaluation budget cannot cover the pool.
    InsufficientBudget(String),
    /// Fewer points than requested clusters.
    TooFewPoints(String),
    /// Adapters cannot be merged in the requested parameter-space mode.
    IncompatibleAdapters(String),
    /// A retrieved task has no paired adapter.
    Unpaired(String),
    /// Invalid configuration or spec.
    Config(String),
}

impl Error {
    /// Process exit code for the CLI: I/O failures are 3, everything else 2.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Io(_) => 3,
            _ => 2,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension(m) => write!(f, "dimension mismatch: {m}"),
            Error::MissingLayer(m) => write!(f, "missing layer: {m}"),
            Error::Format(m) => write!(f, "format error: {m}"),
            Error::Validation(m) => write!(f, "validation error: {m}"),
            Error::Io(m) => write!(f, "io error: {m}"),
            Error::NotFound(m) => write!(f, "not found: {m}"),
            Error::EmptyTask(m) => write!(f, "empty task: {m}"),
            Error::EncoderMismatch(m) => write!(f, "encoder mismatch: {m}"),
            Error::EmptyCatalog(m) => write!(f, "empty catalog: {m}"),
            Error::Evaluation(m) => write!(f, "evaluation error: {m}"),
            Error::EmptyPool(m) => write!(f, "empty pool: {m}"),
            Error::InsufficientBudget(m) => write!(f, "insufficient budget: {m}"),
            Error::TooFewPoints(m) => write!(f, "too few points: {m}"),
            Error::IncompatibleAdapters(m) => write!(f, "incompatible adapters: {m}"),
            Error::Unpaired(m) => write!(f, "unpaired task: {m}"),
            Error::Config(m) => write!(f, "config error: {m}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
