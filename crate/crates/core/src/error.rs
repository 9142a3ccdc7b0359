use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("grid too coarse: n = {n}, need n >= {min}")]
    GridTooCoarse { n: usize, min: usize },

    #[error("time grid too coarse: m = {m}, need m >= {min}")]
    TimeGridTooCoarse { m: usize, min: usize },

    #[error("invalid exponent p = {0}: need p >= 1 or p = inf")]
    InvalidExponent(f64),

    #[error("non-finite entry at index {index}")]
    NonFinite { index: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular system at lambda = {lambda}: nearest eigenvalue {nearest}, condition estimate {condition:.3e}")]
    NearSpectrum {
        lambda: Complex64,
        nearest: Complex64,
        condition: f64,
    },

    #[error("singular system at lambda = {lambda} (condition estimate {condition:.3e})")]
    Singular { lambda: Complex64, condition: f64 },

    #[error("feedback singular at lambda = {lambda}: |1 - K D_lambda| = {gap:.3e}")]
    FeedbackSingular { lambda: Complex64, gap: f64 },

    #[error("degenerate boundary rows: elimination determinant {det:.3e}")]
    DegenerateBoundary { det: f64 },

    #[error("matrix exponential rejected: t*||M||_1 = {scaled_norm:.3e} exceeds {limit:.1e}")]
    ExpmOverflow { scaled_norm: f64, limit: f64 },

    #[error("unstable generator: spectral abscissa {abscissa:.3e} > 0 (apply a shift)")]
    UnstableGenerator { abscissa: f64 },

    #[error("zero forcing: ||f|| = 0")]
    ZeroForcing,

    #[error("eigenvalue solver failed")]
    EigenFailure,

    #[error("dense assembly limited to n <= {limit}, got n = {n}")]
    TooLargeForDense { n: usize, limit: usize },
}

pub type Result<T> = std::result::Result<T, LabError>;
