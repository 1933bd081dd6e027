use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("matrix must have at least one row and one column, got {rows}x{cols}")]
    Empty { rows: usize, cols: usize },

    #[error("data length {len} does not match shape {rows}x{cols}")]
    DataLength { rows: usize, cols: usize, len: usize },

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("negative value {value} at ({row}, {col})")]
    Negative { row: usize, col: usize, value: f64 },

    #[error("feature {feature} is constant (min = max = {value})")]
    DegenerateFeature { feature: usize, value: f64 },

    #[error("basis column {column} has zero sum (iteration {iteration})")]
    DegenerateBasis { column: usize, iteration: usize },

    #[error("coefficient column {column} is all zero")]
    DegenerateCoefficient { column: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("observations have zero total variance")]
    UndefinedVariance,

    #[error("{factor} is singular or ill-conditioned (condition number {condition:e})")]
    Singular { factor: &'static str, condition: f64 },

    #[error("insufficient data: need N > R, got N = {n}, R = {r}")]
    InsufficientData { n: usize, r: usize },

    #[error("{path}: {message}")]
    Ingest { path: String, message: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("cross-validation cell (beta = {beta}, rank = {rank}, gamma = {gamma}, fold = {fold}): {source}")]
    CvCell {
        beta: f64,
        rank: usize,
        gamma: f64,
        fold: usize,
        source: Box<Error>,
    },
}

impl Error {
    /// True for errors raised by numerical degeneracy rather than bad
    /// shapes or configuration.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::DegenerateFeature { .. }
            | Error::DegenerateBasis { .. }
            | Error::DegenerateCoefficient { .. }
            | Error::DegenerateInput(_)
            | Error::UndefinedVariance
            | Error::Singular { .. }
            | Error::InsufficientData { .. } => true,
            Error::CvCell { source, .. } => source.is_numerical(),
            _ => false,
        }
    }

    pub fn is_ingestion(&self) -> bool {
        matches!(self, Error::Ingest { .. })
    }
}
