// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

/// Errors raised by the influence library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("series too short for block length: length {len}, block length {block_len}")]
    SeriesTooShort { len: usize, block_len: usize },
    #[error("unknown dimension {dim} (series has {dims})")]
    UnknownDimension { dim: usize, dims: usize },
    #[error("invalid series: {0}")]
    InvalidSeries(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("instance/model block length mismatch: expected {expected}, got {got}")]
    BlockLenMismatch { expected: usize, got: usize },
    #[error("degenerate design matrix (condition estimate {condition:e})")]
    DegenerateDesign { condition: f64 },
    #[error("Hessian not positive definite")]
    NotPositiveDefinite,
    #[error("CG failed to converge after {iterations} iterations (relative residual {residual:e})")]
    CgNotConverged { iterations: usize, residual: f64 },
    #[error("point {point} not covered by any block")]
    PointNotCovered { point: usize },
    #[error("insufficient data after removal: {remaining} instances for {params} parameters")]
    InsufficientData { remaining: usize, params: usize },
    #[error("degenerate subsampling: no draw both includes and excludes the target block")]
    DegenerateSubsampling,
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("AUC undefined: labels contain a single class")]
    AucUndefined,
    #[error("R² undefined: targets have zero variance")]
    R2Undefined,
    #[error("invalid synthetic spec: {0}")]
    InvalidSynthSpec(String),
}

impl Error {
    /// True for failures of the numerical core rather than of the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateDesign { .. } | Error::NotPositiveDefinite | Error::CgNotConverged { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
