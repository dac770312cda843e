use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Input(String),

    #[error("missing column `{0}` in header")]
    MissingColumn(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate source: no tokens left after stop-word removal")]
    DegenerateSource,

    #[error("token id {0} is out of range for a vocabulary of size {1}")]
    IdOutOfRange(u32, usize),

    #[error("sequence of length {len} exceeds the model maximum {max}")]
    SequenceTooLong { len: usize, max: usize },

    #[error("training diverged at epoch {epoch}, step {step}: {detail}")]
    Divergence {
        epoch: usize,
        step: usize,
        detail: String,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("degenerate embedding (zero vector)")]
    DegenerateEmbedding,

    #[error("embedding dimension {got} does not match the expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("insufficient candidates: need at least {needed}, got {got}")]
    InsufficientCandidates { needed: usize, got: usize },

    #[error("training data contains a single class")]
    SingleClass,

    #[error("no evaluable pairs")]
    NoEvaluablePairs,

    #[error("backend timed out after {0:?}")]
    BackendTimeout(std::time::Duration),

    #[error("backend protocol error on response line {line}: {detail}")]
    BackendProtocol { line: usize, detail: String },

    #[error("backend failure: {0}")]
    Backend(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 input error, 3 numeric failure, 4 backend failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Divergence { .. } | Error::DegenerateEmbedding => 3,
            Error::BackendTimeout(_) | Error::BackendProtocol { .. } | Error::Backend(_) => 4,
            _ => 2,
        }
    }
}
