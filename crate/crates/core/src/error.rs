use thiserror::Error;

/// Errors raised by the inference library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid label set: {0}")]
    InvalidLabelSet(String),

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("document `{doc_id}`, pair {pair}: missing gold label")]
    MissingGold { doc_id: String, pair: usize },

    #[error("undefined prior for type pair ({source_type}, {target_type}): pair never observed")]
    UndefinedPrior { source_type: String, target_type: String },

    #[error("length mismatch in {context}: expected {expected}, found {found}")]
    LengthMismatch {
        context: String,
        expected: usize,
        found: usize,
    },

    #[error("invalid hyper-parameters: {0}")]
    InvalidHyperParams(String),

    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),

    #[error("instance too large for exhaustive search: {assignments} assignments exceed the limit of {limit}")]
    TooLarge { assignments: f64, limit: u64 },

    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error("invalid closure rules: {0}")]
    InvalidRules(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
