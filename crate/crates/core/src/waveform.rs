//! Multi-tone gate envelopes in the carrier rotating frame.

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::{cycle_phase, Real};
use crate::transfer::PredistortionMap;

/// Motional-mode frequency used by the presets, Hz.
pub const DEFAULT_NU: f64 = 1.84e6;
/// Gate detuning used by the presets, Hz.
pub const DEFAULT_XI0: f64 = 20e3;
pub const DEFAULT_SAMPLE_RATE: f64 = 1e9;
/// Relative quadrature level below which an envelope counts as real.
pub const REAL_ENVELOPE_THRESHOLD: f64 = 1e-12;

/// One sideband tone pair at detuning `n·ξ₀` from the motional sideband.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tone {
    pub harmonic: u32,
    /// Signed relative amplitude.
    pub amplitude: f64,
    /// Phase in rad.
    #[serde(default)]
    pub phase: f64,
}

impl Tone {
    pub fn new(harmonic: u32, amplitude: f64) -> Self {
        Self {
            harmonic,
            amplitude,
            phase: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateSpec {
    /// Motional-mode frequency ν, Hz.
    pub nu: f64,
    /// Gate detuning ξ₀, Hz.
    pub xi0: f64,
    pub tones: Vec<Tone>,
    /// Target peak envelope amplitude in `[0, 1]`.
    pub drive_amplitude: f64,
    #[serde(default)]
    pub dpd: bool,
}

impl GateSpec {
    /// Cardioid(1,2): equal-magnitude tones at `ξ₀` and `2ξ₀` with a relative
    /// π phase carried by the sign.
    pub fn cardioid(nu: f64, xi0: f64, drive_amplitude: f64) -> Self {
        Self {
            nu,
            xi0,
            tones: vec![Tone::new(1, 1.0), Tone::new(2, -1.0)],
            drive_amplitude,
            dpd: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.xi0 > 0.0 && self.xi0.is_finite()) {
            return Err(invalid("gate detuning must be positive"));
        }
        if !(self.nu > self.xi0 && self.nu.is_finite()) {
            return Err(invalid("mode frequency must exceed the gate detuning"));
        }
        if !(0.0..=1.0).contains(&self.drive_amplitude) {
            return Err(invalid("drive amplitude must lie in [0, 1]"));
        }
        if self.tones.is_empty() {
            return Err(invalid("gate spec has no tones"));
        }
        if self.tones.iter().any(|t| t.harmonic == 0) {
            return Err(invalid("gate tones need a positive harmonic index"));
        }
        if self
            .tones
            .iter()
            .any(|t| !(t.amplitude.is_finite() && t.phase.is_finite()))
        {
            return Err(invalid("tone amplitudes and phases must be finite"));
        }
        Ok(())
    }

    pub fn gate_time(&self) -> f64 {
        1.0 / self.xi0
    }

    /// Offset of tone `n` from the carrier, `ν + nξ₀`.
    pub fn tone_frequency(&self, harmonic: u32) -> f64 {
        self.nu + f64::from(harmonic) * self.xi0
    }

    pub fn max_harmonic(&self) -> u32 {
        self.tones.iter().map(|t| t.harmonic).max().unwrap_or(0)
    }

    /// Lowest sample rate accepted by [`synth_cardioid`].
    pub fn min_sample_rate(&self) -> f64 {
        4.0 * self.tone_frequency(self.max_harmonic())
    }
}

/// Sampled complex envelope `I + iQ`.
#[derive(Debug, Clone, PartialEq)]
pub struct IqWaveform<T> {
    pub sample_rate: f64,
    pub samples: Vec<Complex<T>>,
    /// Gate definition the samples came from, when there is one.
    pub spec: Option<GateSpec>,
    pub dpd: bool,
}

impl<T: Real> IqWaveform<T> {
    pub fn new(sample_rate: f64, samples: Vec<Complex<T>>) -> Self {
        Self {
            sample_rate,
            samples,
            spec: None,
            dpd: false,
        }
    }

    pub fn from_real(sample_rate: f64, samples: impl IntoIterator<Item = T>) -> Self {
        Self::new(
            sample_rate,
            samples.into_iter().map(|i| Complex::new(i, T::zero())).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn time(&self, index: usize) -> f64 {
        index as f64 / self.sample_rate
    }

    pub fn peak(&self) -> T {
        self.samples.iter().map(|s| s.norm()).fold(T::zero(), T::max)
    }

    /// `max|Q| / max|I|`; zero for an all-zero record.
    pub fn quadrature_ratio(&self) -> f64 {
        let (i, q) = self.samples.iter().fold((0.0f64, 0.0f64), |(i, q), s| {
            (i.max(s.re.abs().as_f64()), q.max(s.im.abs().as_f64()))
        });
        if q == 0.0 {
            0.0
        } else if i == 0.0 {
            f64::INFINITY
        } else {
            q / i
        }
    }

    pub fn is_real(&self) -> bool {
        self.quadrature_ratio() < REAL_ENVELOPE_THRESHOLD
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            samples: self.samples.iter().map(|&s| s * factor).collect(),
            ..self.clone()
        }
    }
}

/// Samples `Σ 2r_n cos(2π(ν+nξ₀)t + φ_n)` over `n_periods` gate periods and
/// scales the peak to the spec's drive amplitude.
///
/// The red-sideband partner of each tone carries the conjugate phase, so the
/// envelope is real.
pub fn synth_cardioid<T: Real>(spec: &GateSpec, sample_rate: f64, n_periods: usize) -> Result<IqWaveform<T>> {
    spec.validate()?;
    let required = spec.min_sample_rate();
    if !(sample_rate > required) {
        return Err(Error::UndersampledSpec { sample_rate, required });
    }
    if n_periods == 0 {
        return Err(invalid("need at least one gate period"));
    }
    let n = (n_periods as f64 * sample_rate / spec.xi0).round() as usize;
    let samples: Vec<T> = (0..n)
        .into_par_iter()
        .map(|i| {
            let t = i as f64 / sample_rate;
            spec.tones
                .iter()
                .map(|tone| {
                    let theta: f64 = cycle_phase(spec.tone_frequency(tone.harmonic), t);
                    2.0 * tone.amplitude * (theta + tone.phase).cos()
                })
                .sum::<f64>()
        })
        .map(T::lit)
        .collect();
    let mut w = IqWaveform::from_real(sample_rate, samples);
    w.spec = Some(GateSpec {
        dpd: false,
        ..spec.clone()
    });
    if spec.drive_amplitude == 0.0 || w.peak() == T::zero() {
        return Ok(w.scaled(T::zero()));
    }
    normalize_peak(&w, T::lit(spec.drive_amplitude))
}

/// Rescales so that `max|sample| = target`.
pub fn normalize_peak<T: Real>(w: &IqWaveform<T>, target: T) -> Result<IqWaveform<T>> {
    let peak = w.peak();
    if !(peak > T::zero()) {
        return Err(invalid("cannot normalize an all-zero waveform"));
    }
    let mut out = w.scaled(target / peak);
    if let Some(spec) = out.spec.as_mut() {
        spec.drive_amplitude = target.as_f64();
    }
    Ok(out)
}

/// Applies the inverse amplitude response sample by sample to a real
/// envelope; magnitudes above `a_corr` map to full drive.
pub fn predistort<T: Real>(w: &IqWaveform<T>, map: &PredistortionMap<T>) -> Result<IqWaveform<T>> {
    let ratio = w.quadrature_ratio();
    if ratio >= REAL_ENVELOPE_THRESHOLD {
        return Err(Error::ComplexEnvelopeUnsupported { ratio });
    }
    let peak = w.peak();
    if peak > T::one() + T::epsilon() {
        return Err(invalid(format!("envelope peak {peak} exceeds full drive")));
    }
    let samples = w
        .samples
        .par_iter()
        .map(|s| Complex::new(map.apply(s.re), T::zero()))
        .collect();
    let mut spec = w.spec.clone();
    if let Some(s) = spec.as_mut() {
        s.dpd = true;
    }
    Ok(IqWaveform {
        sample_rate: w.sample_rate,
        samples,
        spec,
        dpd: true,
    })
}
