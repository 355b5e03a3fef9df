use thiserror::Error;

use crate::derivatives::DerivResult;
use crate::normparse::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{0} must be a nonzero vector")]
    ZeroVector(&'static str),

    #[error("vector coordinate {index} is not finite")]
    NonFinite { index: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("norm is not smooth at u in direction v: rho_plus = {plus}, rho_minus = {minus}")]
    NonSmooth { plus: f64, minus: f64 },

    #[error("numeric derivative did not reach tolerance; best enclosure {} +/- {}", best.value, best.enclosure_width)]
    ToleranceUnreachable { best: DerivResult },

    #[error("angle cosine argument {0} is outside [-1, 1] beyond roundoff")]
    CosineOutOfRange(f64),

    #[error("operation requires ambient dimension {required}, got {found}")]
    UnsupportedDimension { required: usize, found: usize },

    #[error("linear map is zero")]
    ZeroMap,
}
