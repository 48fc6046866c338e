use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("sample size mismatch: {covariates} covariate rows but {responses} responses")]
    SampleSizeMismatch { covariates: usize, responses: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown setting `{0}` (expected one of a, b, c, d)")]
    UnknownSetting(String),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("response {y0} lies outside the estimated support")]
    OutsideSupport { y0: f64 },

    #[error("importance sampling degenerate (effective sample size {ess:.1})")]
    DegenerateImportance { ess: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: u64, msg: String },

    #[error("{failed} of {total} replications failed")]
    TooManyFailures { failed: usize, total: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
