use thiserror::Error;

/// Dataset invariant violations reported by [`crate::types::validate_points`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatasetError {
    #[error("point {id}: {what} has length {found}, expected {expected}")]
    DimensionMismatch {
        id: usize,
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error(
        "point {id}: feature norm {norm} is not 1 (inner-product datasets must be normalized)"
    )]
    NotNormalized { id: usize, norm: f64 },
    #[error("point ids are not contiguous: position {position} holds id {id}")]
    NonContiguousIds { position: usize, id: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("bias {bias} too small, must exceed {min}")]
    BiasTooSmall { bias: f64, min: f64 },
    #[error("scale factor w must be positive and finite, got {0}")]
    InvalidWeight(f64),
    #[error("g_max must be positive and finite, got {0}")]
    InvalidGMax(f64),
    #[error("invalid graph parameters: {0}")]
    InvalidGraph(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("dimension mismatch: {left} vs {right}")]
pub struct DimensionMismatch {
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("cannot build an index over an empty dataset")]
    EmptyDataset,
    #[error("query {what} dimension is {found}, index expects {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("ef_search {ef_search} is smaller than k {k}")]
    BudgetTooSmall { ef_search: usize, k: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("strategy {0} needs an index that was not supplied")]
    MissingIndex(&'static str),
}

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad index file: {0}")]
    Format(String),
    #[error("index does not match dataset: {0}")]
    DatasetMismatch(String),
}

#[derive(Debug, Error)]
pub enum VecsError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("record {0} has a different dimension than record 0")]
    RaggedDims(usize),
    #[error("record {0} is truncated")]
    TruncatedRecord(usize),
    #[error("record {record}: negative dimension {dim}")]
    NegativeDim { record: usize, dim: i32 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchError {
    #[error("{results} result lists for {truth} ground-truth rows")]
    LengthMismatch { results: usize, truth: usize },
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Param(#[from] ParamError),
}
