use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("dividends missing for subset {missing:#x} of coalition {coalition:#x}")]
    IncompleteDividends { coalition: u64, missing: u64 },
    #[error("degenerate proportional weights: {0}")]
    DegenerateWeights(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("permutation {index} has zero probability under the sampling distribution")]
    SupportMismatch { index: usize },
    #[error("no training rows")]
    EmptyData,
    #[error("split error: {0}")]
    Split(String),
    #[error("calibration set too small: rank {rank} exceeds {n} scores")]
    InsufficientCalibration { rank: usize, n: usize },
    #[error("degenerate baseline for test point {point}: v(D) - v(empty) = {span:e}")]
    DegenerateBaseline { point: usize, span: f64 },
}

pub(crate) fn dim(msg: impl Into<String>) -> Error {
    Error::Dimension(msg.into())
}

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}
