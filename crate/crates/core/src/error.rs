use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid history space: {0}")]
    InvalidSpace(String),

    #[error("non-finite action for history `{0}`")]
    NonFiniteAction(String),

    #[error("invalid classicality: {0}")]
    InvalidClassicality(String),

    #[error("partition function vanished (|Z| = {magnitude:e} against term scale {scale:e})")]
    ZeroPartitionFunction { magnitude: f64, scale: f64 },

    #[error("product space of {size} histories exceeds the cap of {cap}")]
    SizeOverflow { size: u128, cap: usize },

    #[error("derivative step straddles a branch cut of ln Z (Im jump {jump})")]
    StepTooLarge { jump: f64 },

    #[error("amplitudes must be normalized: sum w a = {re}{im:+}i")]
    NotNormalized { re: f64, im: f64 },

    #[error("ensemble invariant violated: {0}")]
    InvariantViolation(String),

    #[error("amplitude too close to zero at history `{0}`")]
    AmplitudeNearZero(String),

    #[error("gaussian integral diverges for alpha = {re}{im:+}i (Re(1/alpha) < 0)")]
    DivergentIntegral { re: f64, im: f64 },

    #[error("regularization did not converge: last change {change:e} > tolerance {tolerance:e}")]
    NoConvergence { change: f64, tolerance: f64 },

    #[error("invalid regulator: {0}")]
    InvalidRegulator(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),
}
