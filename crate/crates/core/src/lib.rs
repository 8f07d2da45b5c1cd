//! Digital predistortion for acousto-optic modulators driving multi-tone
//! Mølmer–Sørensen gates.
//!
//! The pipeline runs from a measured modulator response to a gate-fidelity
//! estimate: fit and invert the static transfer function ([`transfer`]),
//! synthesize and predistort the drive envelope ([`waveform`]), push it
//! through the modulator model ([`forward`]), read the tone powers off a
//! heterodyne beat spectrum ([`spectral`]) and turn them into a phase-space
//! fidelity ([`fidelity`]). [`analysis`] covers the experimental side and
//! [`pipeline`] strings the simulation together over a drive sweep.
//!
//! Numerical code is generic over [`Real`]; the aliases below fix it to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod fidelity;
pub mod forward;
pub mod io;
pub mod numeric;
pub mod pipeline;
pub mod scalar;
pub mod spectral;
pub mod transfer;
pub mod waveform;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Transfer = transfer::PolynomialTransfer<f64>;
pub type Predistortion = transfer::PredistortionMap<f64>;
pub type Calibration = transfer::CalibrationDataset<f64>;
pub type Waveform = waveform::IqWaveform<f64>;
pub type Optical = forward::OpticalWaveform<f64>;
pub type Spectrum = spectral::Psd<f64>;
pub type Tones = spectral::ToneReport<f64>;
pub type Drive = fidelity::DriveSpectrum<f64>;
pub type Outcome = fidelity::PhaseSpaceOutcome<f64>;
pub type Fringe = analysis::ParityFit<f64>;
pub type Axes = analysis::AxisFit<f64>;

/// Single-precision aliases for memory-bound waveform work.
pub mod f32 {
    pub type Transfer = crate::transfer::PolynomialTransfer<f32>;
    pub type Predistortion = crate::transfer::PredistortionMap<f32>;
    pub type Waveform = crate::waveform::IqWaveform<f32>;
    pub type Optical = crate::forward::OpticalWaveform<f32>;
    pub type Spectrum = crate::spectral::Psd<f32>;
}
