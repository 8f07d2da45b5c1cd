use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("need at least {required} calibration points below A = {threshold}, found {found}")]
    InsufficientLowAmplitudeData {
        required: usize,
        threshold: f64,
        found: usize,
    },

    #[error("fitted amplitude polynomial is not increasing on [0, 1] (slope {slope:.3e} at A = {drive:.4})")]
    NonMonotonicFit { drive: f64, slope: f64 },

    #[error("phase calibration does not cover the fit range: {0}")]
    InsufficientRangeCoverage(String),

    #[error("amplitude transfer is not invertible: not strictly increasing near A = {drive:.4}")]
    NonMonotonicTransfer { drive: f64 },

    #[error("transfer kind mismatch: expected {expected}, got {found}")]
    KindMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("sample rate {sample_rate:.6e} Hz is below the required {required:.6e} Hz")]
    UndersampledSpec { sample_rate: f64, required: f64 },

    #[error("beat record sample rate {sample_rate:.6e} Hz is below the required {required:.6e} Hz")]
    UndersampledBeat { sample_rate: f64, required: f64 },

    #[error("envelope has a quadrature component (max |Q| / max |I| = {ratio:.3e}); only real envelopes can be predistorted")]
    ComplexEnvelopeUnsupported { ratio: f64 },

    #[error("spectral resolution {resolution:.1} Hz is coarser than {limit:.1} Hz")]
    ResolutionTooCoarse { resolution: f64, limit: f64 },

    #[error("drive spectrum has no calibrated Rabi frequency")]
    UncalibratedSpectrum,

    #[error("gate tone n = {harmonic} failed validation")]
    InvalidGateTones { harmonic: u8 },

    #[error("parity scan does not constrain the fringe: {0}")]
    DegenerateScan(String),

    #[error("likelihood Hessian is not positive definite at A = {contrast:.6}, phi0 = {phase:.6}")]
    NonPositiveDefiniteHessian { contrast: f64, phase: f64 },

    #[error("axis fit is underdetermined: {0}")]
    UnderdeterminedFit(String),

    #[error("estimated infidelity never reaches the budget {budget:.1e}")]
    BudgetNotCrossed { budget: f64 },

    #[error("iteration did not converge: {0}")]
    NoConvergence(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonPositiveDefiniteHessian { .. } | Error::NoConvergence(_) | Error::BudgetNotCrossed { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
