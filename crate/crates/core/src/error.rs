use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vertex {vertex} out of range for a graph on {p} vertices")]
    VertexOutOfRange { vertex: usize, p: usize },

    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),

    #[error("nonpositive diagonal element {value} at position {index}")]
    NonPositiveDiagonal { index: usize, value: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid interval: lower {lower} must be below upper {upper}")]
    InvalidInterval { lower: f64, upper: f64 },

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("empty summary: {0}")]
    EmptySummary(&'static str),

    #[error("chain {chain} failed: {source}")]
    Chain {
        chain: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
