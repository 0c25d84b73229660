use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("atom {index} at ({x:.3}, {y:.3}, {z:.3}) lies outside the grid extent")]
    OutOfBounds { index: usize, x: f64, y: f64, z: f64 },

    #[error("element {0} has no channel in this grid")]
    UnknownChannel(String),

    #[error("chain {chain} diverged at step {step}")]
    Divergence { chain: usize, step: u64 },

    #[error("training diverged at step {step} (loss = {loss})")]
    TrainingFailure { step: usize, loss: f64 },

    #[error("coordinate refinement produced non-finite coordinates for peak {peak}")]
    RefinementFailure { peak: usize },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("byte {offset}: {msg}")]
    Format { offset: usize, msg: String },

    #[error("truncated file: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
