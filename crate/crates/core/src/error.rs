use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: missing column `{column}`")]
    MissingColumn { column: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}, column `{column}`: cannot read `{value}` as a number")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },

    #[error("domain error at row {row}: {message}")]
    RowDomain { row: usize, message: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate covariate `{column}`: sample standard deviation is zero")]
    DegenerateCovariate { column: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("zero cell count in 2x2 table (no continuity correction is applied)")]
    ZeroCell,

    #[error("insufficient data: need at least {needed}, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("numerical error: {message} (condition number {condition_number:.3e})")]
    Numerical {
        message: String,
        condition_number: f64,
    },

    #[error("sampler diverged at sweep {sweep}: {message}")]
    Divergence { sweep: usize, message: String },

    #[error("invalid model specification: {0}")]
    Spec(String),

    #[error("dimension mismatch: {0}")]
    Mismatch(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
