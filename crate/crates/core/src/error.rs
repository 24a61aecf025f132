use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("matrix is not positive definite: pivot {pivot} has value {value:e}")]
    NotPositiveDefinite { pivot: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("uniform ellipticity violated: {0}")]
    EllipticityViolation(String),
    #[error("index set too large: {size} exceeds cap {cap}")]
    IndexSetTooLarge { size: u128, cap: usize },
    #[error("axis {axis} out of range for d = {d}")]
    AxisOutOfRange { axis: usize, d: usize },
    #[error("negative tolerance {0}")]
    NegativeTolerance(f64),
    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),
    #[error("enumeration too large: {0}")]
    EnumerationTooLarge(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
