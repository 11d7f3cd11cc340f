use thiserror::Error;

/// Errors raised by the library layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("gamma function pole at argument {0}")]
    Pole(f64),

    #[error("basis change needs at least {needed} variables, got {num_vars}")]
    Rank { needed: usize, num_vars: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("rows are linearly dependent: smallest Gram eigenvalue {min_eigenvalue:e} below threshold {threshold:e}")]
    RankDeficient { min_eigenvalue: f64, threshold: f64 },

    #[error("{n} is not a sum of three squares (three-square obstruction: n = 4^a(8b+7))")]
    NotRepresentable { n: u64 },

    #[error("spectral range violation: {0}")]
    SpectralRange(String),

    #[error("functional is not right-orthogonally invariant: {0}")]
    NotInvariant(String),

    #[error("insufficient replicates: {0}")]
    InsufficientReplicates(String),

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("zonal table holds degrees up to {have}, degree {needed} requested")]
    TableTooSmall { needed: usize, have: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("table cache: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
