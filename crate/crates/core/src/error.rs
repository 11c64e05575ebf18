use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("normalization undefined: all couplings give tanh(zJ) = 0")]
    UndefinedNormalization,

    #[error("field is in {got} space, expected {expected} space")]
    SpaceMismatch { expected: String, got: String },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("{what} has size {size}, above the limit {limit}")]
    SizeGuard { what: String, size: usize, limit: usize },

    #[error("enumeration budget exceeded: n_max = {requested} > {budget}")]
    BudgetExceeded { requested: usize, budget: usize },

    #[error("ill-defined quantity: {0}")]
    IllDefined(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl LabError {
    pub fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        LabError::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
