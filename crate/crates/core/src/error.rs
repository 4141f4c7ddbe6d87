use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported dimension m = {0} (only m = 1, 2 are supported)")]
    UnsupportedDimension(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("cutoff K = {k} too small for connection bandwidth K_A = {k_a} (need K >= K_A + 1)")]
    CutoffTooSmall { k: usize, k_a: usize },
    #[error("invalid connection: {0}")]
    InvalidConnection(String),
    #[error("matrix is not Hermitian (relative deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("order alpha = {0} outside (0, 1)")]
    OrderOutOfRange(f64),
    #[error("source not orthogonal to the kernel: inner products {0:?}")]
    KernelComponent(Vec<f64>),
    #[error("source not supported in the region (max off-region amplitude {0:.3e})")]
    SupportViolation(f64),
    #[error("negative time t = {0}")]
    NegativeTime(f64),
    #[error("evaluation time {t} outside [0, {t_end}]")]
    TimeOutOfRange { t: f64, t_end: f64 },
    #[error("time grid mismatch: {0}")]
    TimeGridMismatch(String),
    #[error("gauge map is not unitary (deviation {0:.3e})")]
    NonUnitary(f64),
    #[error("Gram matrix numerically singular at beta = {0:e}; increase beta")]
    SingularGram(f64),
    #[error("point not reachable: d(x, O) = {dist} >= T = {t}")]
    Unreachable { dist: f64, t: f64 },
    #[error("rank-deficient Gram matrix (rank {rank} < {expected})")]
    RankDeficient { rank: usize, expected: usize },
    #[error("no arrival within the time horizon")]
    NoArrival,
    #[error("search grid exhausted without inclusion")]
    SearchExhausted,
    #[error("grid too coarse: condition estimate {0:.3e}")]
    GridTooCoarse(f64),
    #[error("odd dimension m = {0}: chirality does not anticommute with D")]
    OddDimension(usize),
    #[error("configuration invalid:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error("unknown experiment '{0}'")]
    UnknownExperiment(String),
    #[error("linear algebra failure: {0}")]
    Linalg(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl From<ndarray_linalg::error::LinalgError> for LabError {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        LabError::Linalg(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
