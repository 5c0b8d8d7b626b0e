use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{name} = {value} outside [{min}, {max}]")]
    OutOfRange {
        name: &'static str,
        value: i64,
        min: i64,
        max: i64,
    },
    #[error("invalid frame configuration: {0}")]
    Frame(String),
    #[error("SSB spans overlap: symbol {first} and symbol {second}")]
    Overlap { first: usize, second: usize },
    #[error("sample span [{start}, {end}) exceeds buffer of {len} samples")]
    OutOfBuffer { start: usize, end: usize, len: usize },
    #[error("channel magnitude {0:e} too small to equalize")]
    Equalization(f64),
    #[error("invalid channel scenario: {0}")]
    Scenario(String),
    #[error("no cell found: PSS metric {metric:.4} below floor {floor:.4}")]
    NoCell { metric: f64, floor: f64 },
    #[error("normalization state has no accumulated vectors")]
    EmptyNormalization,
    #[error("expected {expected} features, got {got}")]
    FeatureLength { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_range(name: &'static str, value: i64, min: i64, max: i64) -> Result<()> {
    if value < min || value > max {
        return Err(Error::OutOfRange {
            name,
            value,
            min,
            max,
        });
    }
    Ok(())
}
