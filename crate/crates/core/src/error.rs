use thiserror::Error;

/// Errors produced by kernelcomp.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: need at least 2 nodes, got {0}")]
    InvalidGrid(usize),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("index {index} out of range (valid: {valid})")]
    Index { index: usize, valid: String },

    #[error("band of half-width {delta} cannot hold {m} overlapping squares; minimal feasible m is {min_feasible_m}")]
    Infeasible {
        delta: f64,
        m: usize,
        min_feasible_m: usize,
    },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("degenerate operator: leading eigenvalue {0} is not positive")]
    DegenerateOperator(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("invalid contraction: operator norm {0} exceeds 1")]
    InvalidContraction(f64),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty estimate: no entry reaches the admissibility threshold")]
    EmptyEstimate,

    #[error("estimate does not cover the domain: {0}")]
    Coverage(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("replication {index}: {source}")]
    Replication {
        index: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Numeric(_) | Error::DegenerateOperator(_) | Error::NotPsd { .. } => true,
            Error::Replication { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
