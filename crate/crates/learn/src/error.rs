use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("vector {0} carries no label")]
    Unlabeled(usize),
    #[error("expected {expected} features, got {got}")]
    FeatureLength { expected: usize, got: usize },
    #[error("label {label} outside 0..{lmax}")]
    LabelOutOfRange { label: usize, lmax: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("{model}: non-finite value at iteration {iteration}: {detail}")]
    NonFinite {
        model: &'static str,
        iteration: usize,
        detail: String,
    },
    #[error("SMO stopped after {iterations} iterations with KKT violation {violation:e}")]
    NotConverged { iterations: usize, violation: f64 },
    #[error("invalid hyperparameter: {0}")]
    Param(String),
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] beamsearch_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
