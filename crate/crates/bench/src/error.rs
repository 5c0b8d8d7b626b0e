use thiserror::Error;

/// Harness failures, grouped by process exit code.
#[derive(Debug, Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("runtime failure: {0}")]
    Runtime(String),
}

impl BenchError {
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 1,
            BenchError::Data(_) => 2,
            BenchError::Runtime(_) => 3,
        }
    }
}

impl From<beamsearch_core::Error> for BenchError {
    fn from(e: beamsearch_core::Error) -> Self {
        match e {
            beamsearch_core::Error::Frame(_) | beamsearch_core::Error::Scenario(_) | beamsearch_core::Error::OutOfRange { .. } => {
                BenchError::Config(e.to_string())
            }
            _ => BenchError::Runtime(e.to_string()),
        }
    }
}

impl From<beamsearch_learn::Error> for BenchError {
    fn from(e: beamsearch_learn::Error) -> Self {
        use beamsearch_learn::Error as L;
        match e {
            L::Format(_) | L::Json(_) | L::Unlabeled(_) | L::FeatureLength { .. } | L::LabelOutOfRange { .. } | L::EmptyDataset => {
                BenchError::Data(e.to_string())
            }
            L::Param(_) => BenchError::Config(e.to_string()),
            _ => BenchError::Runtime(e.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;

pub fn io_runtime(what: &str, e: std::io::Error) -> BenchError {
    BenchError::Runtime(format!("{what}: {e}"))
}
