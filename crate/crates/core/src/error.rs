use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite input")]
    NonFiniteInput,

    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),

    #[error("unsupported derivative order: {0}")]
    UnsupportedDerivative(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: usize, actual: usize },

    #[error("invalid learning rate {0}")]
    InvalidLearningRate(f64),

    #[error("empty collocation set")]
    EmptyCollocation,

    #[error("grid strategy needs a factorable count, got {0}")]
    NonFactorableCount(usize),

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("parameter outside domain")]
    OutsideDomain,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}")]
    TrainingDiverged { epoch: usize },

    #[error("online divergence at epoch {epoch} (last finite loss {last_delta})")]
    OnlineDivergence { epoch: usize, last_delta: f64 },

    #[error("coefficient length {actual} does not match {expected} neurons")]
    CoeffLength { expected: usize, actual: usize },

    #[error("degenerate reference")]
    DegenerateReference,

    #[error("zero matrix")]
    ZeroMatrix,

    #[error("not a model archive")]
    NotAnArchive,

    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),

    #[error("corrupt archive: {0}")]
    CorruptArchive(String),

    #[error("greedy round {round} failed: {source}")]
    Greedy {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
