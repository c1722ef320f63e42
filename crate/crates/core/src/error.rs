//! Error types shared across the simulation engines.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("mode index {mode} out of range for {mode_count} modes")]
    InvalidMode { mode: usize, mode_count: usize },

    #[error("transmission must lie in [0, 1], got {0}")]
    InvalidEta(f64),

    #[error("truncation leakage {leakage:.3e} exceeds tolerance {tolerance:.3e}")]
    Truncation { leakage: f64, tolerance: f64 },

    #[error("state has zero norm (e.g. photon subtraction from vacuum)")]
    ZeroNorm,

    #[error("conditioning on an outcome of vanishing density")]
    ZeroDensity,

    #[error("conditioning on an outcome of zero probability")]
    ZeroProbability,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("operation is not Gaussian: {0}")]
    NonGaussianOp(String),

    #[error("matrix is not symmetric")]
    NonSymmetric,

    #[error("Gaussian boson sampling requires a zero-mean state")]
    NonZeroMean,

    #[error("request exceeds desk-scale limits: {0}")]
    ScaleExceeded(String),

    #[error("photon-number sector too large: {0}")]
    SectorTooLarge(String),

    #[error("no peak found in density")]
    NoPeakFound,

    #[error("grid too coarse: Wigner normalization check failed ({0})")]
    GridTooCoarse(String),

    #[error("loss channel on a pure state; promote to a density operator first")]
    LossOnPureState,

    #[error("event cannot be scheduled: {reason} (event index {event_index})")]
    Unschedulable { event_index: usize, reason: String },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;
