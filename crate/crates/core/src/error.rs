use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid seed cluster: k={k} exceeds torus side {side}")]
    InvalidCluster { k: u32, side: u32 },

    #[error("malformed graph file: {0}")]
    Format(String),

    #[error("graph file length mismatch: expected {expected} target ids, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("target id {id} out of range for {n} nodes")]
    TargetOutOfRange { id: u64, n: usize },

    #[error("trace and graph are inconsistent: {0}")]
    Corrupted(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
