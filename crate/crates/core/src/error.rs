use thiserror::Error;

/// Errors produced across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate member id `{0}`")]
    DuplicateId(String),

    #[error("member `{member}` references undefined parent `{parent}`")]
    UndefinedParent { member: String, parent: String },

    #[error("member `{0}` lists itself as a parent")]
    SelfParent(String),

    #[error("cyclic ancestry involving member `{0}`")]
    CyclicAncestry(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("dense matrix of order {m} exceeds the dense limit {limit}")]
    DenseLimit { m: usize, limit: usize },

    #[error("matrix is not positive definite (pivot {index} = {pivot:e})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("nonpositive denominator {denominator:e} in b coefficient of member {index}")]
    InvalidInbreeding { index: usize, denominator: f64 },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable category, used for one-line error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::DuplicateId(_) => "duplicate_id",
            Error::UndefinedParent { .. } => "undefined_parent",
            Error::SelfParent(_) => "self_parent",
            Error::CyclicAncestry(_) => "cyclic_ancestry",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::DenseLimit { .. } => "dense_limit",
            Error::NotPositiveDefinite { .. } => "not_positive_definite",
            Error::InvalidInbreeding { .. } => "invalid_inbreeding",
            Error::InvalidInstance(_) => "invalid_instance",
            Error::InvalidConfig(_) => "invalid_config",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}
