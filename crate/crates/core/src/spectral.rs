//! Heterodyne beat simulation, flat-top periodograms and per-harmonic tone
//! extraction.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::forward::OpticalWaveform;
use crate::scalar::{cycle_phase, Real};
use crate::waveform::GateSpec;

/// Detection offset of the beat note from the gate carrier, Hz.
pub const DEFAULT_F_DET: f64 = 20e6;
/// Half-width of the peak search around gate tones, Hz.
pub const SEARCH_HALF_WIDTH: f64 = 5e3;
pub const MAX_FREQ_ERROR: f64 = 1e3;
pub const MIN_SNR_DB: f64 = 20.0;
/// Coarsest resolution accepted by [`extract_tones`], Hz.
pub const MAX_RESOLUTION: f64 = 500.0;
/// Half-width of the noise-floor neighbourhood around a sideband group, Hz.
pub const NOISE_HALF_SPAN: f64 = 200e3;
/// Half-width excluded from the noise floor around each expected tone, Hz.
pub const NOISE_EXCLUSION: f64 = 2e3;
/// Harmonics reported for each sideband group.
pub const HARMONICS: [u8; 4] = [0, 1, 2, 3];

/// Symmetric 5-term flat-top window coefficients.
pub const FLAT_TOP: [f64; 5] = [0.215_578_95, 0.416_631_58, 0.277_263_158, 0.083_578_947, 0.006_947_368];

/// Real photodetector record.
#[derive(Debug, Clone, PartialEq)]
pub struct BeatRecord<T> {
    pub sample_rate: f64,
    pub f_det: f64,
    pub samples: Vec<T>,
}

impl<T: Real> BeatRecord<T> {
    pub fn new(sample_rate: f64, f_det: f64, samples: Vec<T>) -> Self {
        Self {
            sample_rate,
            f_det,
            samples,
        }
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn mean_square(&self) -> T {
        let n = T::from_usize_lossy(self.samples.len().max(1));
        self.samples.iter().map(|&x| x * x).sum::<T>() / n
    }
}

/// Additive white Gaussian noise on the beat record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeatNoise {
    /// Per-sample standard deviation, record units.
    pub sigma: f64,
    pub seed: u64,
}

/// `ref·Re[y(t)·e^{−i2πf_det t}]`, plus optional noise.
///
/// A tone at `+(ν+nξ₀)` lands at `f_det − (ν+nξ₀)` and its mirror at
/// `f_det + (ν+nξ₀)`.
pub fn heterodyne_mix<T: Real>(
    opt: &OpticalWaveform<T>,
    f_det: f64,
    reference_amplitude: T,
    noise: Option<BeatNoise>,
) -> Result<BeatRecord<T>> {
    let top = opt.spec.as_ref().map(|s| s.nu + 3.0 * s.xi0).unwrap_or(0.0);
    let required = 2.0 * (f_det.abs() + top);
    if !(opt.sample_rate > required) {
        return Err(Error::UndersampledBeat {
            sample_rate: opt.sample_rate,
            required,
        });
    }
    let mut samples: Vec<T> = opt
        .samples
        .iter()
        .enumerate()
        .map(|(i, y)| {
            let theta: T = cycle_phase(f_det, i as f64 / opt.sample_rate);
            reference_amplitude * (y.re * theta.cos() + y.im * theta.sin())
        })
        .collect();
    if let Some(n) = noise {
        if !(n.sigma >= 0.0 && n.sigma.is_finite()) {
            return Err(invalid("noise sigma must be finite and non-negative"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(n.seed);
        let dist = Normal::new(0.0, n.sigma).map_err(|e| invalid(e.to_string()))?;
        for s in samples.iter_mut() {
            *s = *s + T::lit(dist.sample(&mut rng));
        }
    }
    Ok(BeatRecord::new(opt.sample_rate, f_det, samples))
}

/// One-sided power spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct Psd<T> {
    /// Bin spacing, Hz.
    pub resolution: f64,
    pub power: Vec<T>,
    /// Equivalent noise bandwidth of the window, in bins.
    pub enbw_bins: f64,
}

impl<T: Real> Psd<T> {
    pub fn frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.resolution
    }

    pub fn nearest_bin(&self, f: f64) -> Option<usize> {
        let k = (f / self.resolution).round();
        if k < 0.0 || k as usize >= self.power.len() {
            None
        } else {
            Some(k as usize)
        }
    }

    /// Window-corrected total power; equals the record's mean square.
    pub fn total_power(&self) -> T {
        self.power.iter().copied().sum::<T>() / T::lit(self.enbw_bins)
    }
}

/// Symmetric flat-top window of length `n`.
pub fn flat_top<T: Real>(n: usize) -> Vec<T> {
    if n == 1 {
        return vec![T::one()];
    }
    let m = (n - 1) as f64;
    (0..n)
        .map(|i| {
            let x = 2.0 * std::f64::consts::PI * i as f64 / m;
            let v = FLAT_TOP
                .iter()
                .enumerate()
                .map(|(k, &a)| if k % 2 == 0 { a } else { -a } * (k as f64 * x).cos())
                .sum::<f64>();
            T::lit(v)
        })
        .collect()
}

/// Flat-top windowed periodogram. An on-bin sinusoid of amplitude `a` reads
/// `a²/2` at its bin.
pub fn periodogram<T: Real>(rec: &BeatRecord<T>) -> Result<Psd<T>> {
    let n = rec.samples.len();
    if n < 2 {
        return Err(invalid("periodogram needs at least two samples"));
    }
    let w: Vec<T> = flat_top(n);
    let sum: T = w.iter().copied().sum();
    let sum_sq: T = w.iter().map(|&v| v * v).sum();
    let mut buf: Vec<Complex<T>> = rec
        .samples
        .iter()
        .zip(&w)
        .map(|(&x, &wi)| Complex::new(x * wi, T::zero()))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let norm = sum * sum;
    let two = T::lit(2.0);
    let half = n / 2;
    let power = (0..=half)
        .map(|k| {
            let p = buf[k].norm_sqr() / norm;
            if k == 0 || (n % 2 == 0 && k == half) {
                p
            } else {
                two * p
            }
        })
        .collect();
    Ok(Psd {
        resolution: rec.sample_rate / n as f64,
        power,
        enbw_bins: (T::from_usize_lossy(n) * sum_sq / norm).as_f64(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sideband {
    Blue,
    Red,
}

impl fmt::Display for Sideband {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sideband::Blue => "blue",
            Sideband::Red => "red",
        })
    }
}

/// Beat frequency of harmonic `n` for the given sideband group.
pub fn beat_frequency(spec: &GateSpec, f_det: f64, sideband: Sideband, harmonic: u32) -> f64 {
    let f = spec.tone_frequency(harmonic);
    match sideband {
        Sideband::Blue => (f_det - f).abs(),
        Sideband::Red => f_det + f,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtractionMethod {
    PeakSearch,
    DirectSample,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ToneMeasurement<T> {
    /// dB relative to the strongest tone of the report.
    #[serde(with = "crate::io::float")]
    pub power_db: T,
    #[serde(rename = "freq_error_hz", with = "crate::io::float")]
    pub freq_error: T,
    #[serde(with = "crate::io::float")]
    pub snr_db: T,
    pub valid: bool,
    pub method: ExtractionMethod,
}

/// Tone powers of one sideband group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ToneReport<T> {
    pub sideband: Sideband,
    /// Absolute level of the 0 dB reference, dB of PSD units.
    #[serde(default, with = "crate::io::float")]
    pub reference_db: T,
    pub tones: BTreeMap<u8, ToneMeasurement<T>>,
}

impl<T: Real> ToneReport<T> {
    pub fn tone(&self, n: u8) -> Result<&ToneMeasurement<T>> {
        self.tones
            .get(&n)
            .ok_or_else(|| invalid(format!("tone report has no n = {n} entry")))
    }

    /// Power of tone `n` in absolute dB.
    pub fn absolute_db(&self, n: u8) -> Result<T> {
        Ok(self.tone(n)?.power_db + self.reference_db)
    }
}

fn db<T: Real>(x: T) -> T {
    T::lit(10.0) * x.log10()
}

fn median<T: Real>(mut v: Vec<T>) -> Option<T> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / T::lit(2.0)
    })
}

/// Median PSD within [`NOISE_HALF_SPAN`] of the group centre, skipping
/// [`NOISE_EXCLUSION`] around each expected tone.
pub fn noise_floor<T: Real>(psd: &Psd<T>, expected: &[f64]) -> Result<T> {
    let lo = expected.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = expected.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let centre = 0.5 * (lo + hi);
    let vals: Vec<T> = psd
        .power
        .iter()
        .enumerate()
        .filter(|&(k, _)| {
            let f = psd.frequency(k);
            (f - centre).abs() <= NOISE_HALF_SPAN && expected.iter().all(|&e| (f - e).abs() > NOISE_EXCLUSION)
        })
        .map(|(_, &p)| p)
        .collect();
    median(vals).ok_or_else(|| invalid("no PSD bins in the noise-floor neighbourhood"))
}

fn parabolic_offset<T: Real>(psd: &Psd<T>, k: usize) -> f64 {
    if k == 0 || k + 1 >= psd.power.len() {
        return 0.0;
    }
    let y: Vec<f64> = psd.power[k - 1..=k + 1].iter().map(|p| p.as_f64().log10()).collect();
    if y.iter().any(|v| !v.is_finite()) {
        return 0.0;
    }
    let den = y[0] - 2.0 * y[1] + y[2];
    if den >= 0.0 {
        return 0.0;
    }
    (0.5 * (y[0] - y[2]) / den).clamp(-0.5, 0.5)
}

/// Reads the four harmonics of one sideband group.
///
/// Gate tones (`n = 1, 2`) are located by peak search and validated on
/// frequency error and SNR; IM tones (`n = 0, 3`) are read at the expected
/// bin and validated on SNR only.
pub fn extract_tones<T: Real>(psd: &Psd<T>, spec: &GateSpec, f_det: f64, sideband: Sideband) -> Result<ToneReport<T>> {
    if psd.resolution > MAX_RESOLUTION {
        return Err(Error::ResolutionTooCoarse {
            resolution: psd.resolution,
            limit: MAX_RESOLUTION,
        });
    }
    let expected: Vec<f64> = HARMONICS
        .iter()
        .map(|&n| beat_frequency(spec, f_det, sideband, u32::from(n)))
        .collect();
    let floor = noise_floor(psd, &expected)?;

    let mut raw = Vec::with_capacity(HARMONICS.len());
    for (&n, &fe) in HARMONICS.iter().zip(&expected) {
        let (power, err, method) = if n == 1 || n == 2 {
            let lo = ((fe - SEARCH_HALF_WIDTH) / psd.resolution).ceil().max(0.0) as usize;
            let hi = (((fe + SEARCH_HALF_WIDTH) / psd.resolution).floor() as usize).min(psd.power.len() - 1);
            if lo > hi {
                return Err(invalid(format!("search window for n = {n} lies outside the spectrum")));
            }
            let k = (lo..=hi)
                .max_by(|&a, &b| {
                    psd.power[a]
                        .partial_cmp(&psd.power[b])
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
                .expect("non-empty window");
            let f = (k as f64 + parabolic_offset(psd, k)) * psd.resolution;
            (psd.power[k], (f - fe).abs(), ExtractionMethod::PeakSearch)
        } else {
            let k = psd
                .nearest_bin(fe)
                .ok_or_else(|| invalid(format!("n = {n} lies outside the spectrum")))?;
            (
                psd.power[k],
                (psd.frequency(k) - fe).abs(),
                ExtractionMethod::DirectSample,
            )
        };
        raw.push((n, power, err, method));
    }

    let strongest = raw.iter().map(|r| r.1).fold(T::zero(), T::max);
    let reference_db = if strongest > T::zero() {
        db(strongest)
    } else {
        T::zero()
    };
    let mut tones = BTreeMap::new();
    for (n, power, err, method) in raw {
        let snr_db = if power == T::zero() {
            T::neg_infinity()
        } else {
            db(power / floor)
        };
        let snr_ok = snr_db > T::lit(MIN_SNR_DB);
        let valid = match method {
            ExtractionMethod::PeakSearch => snr_ok && err < MAX_FREQ_ERROR,
            ExtractionMethod::DirectSample => snr_ok,
        };
        tones.insert(
            n,
            ToneMeasurement {
                power_db: db(power) - reference_db,
                freq_error: T::lit(err),
                snr_db,
                valid,
                method,
            },
        );
    }
    Ok(ToneReport {
        sideband,
        reference_db,
        tones,
    })
}

/// Gate-to-IM power ratios `(R10, R23)` in dB.
pub fn power_ratios<T: Real>(r: &ToneReport<T>) -> Result<(T, T)> {
    let p = |n| r.tone(n).map(|t| t.power_db);
    Ok((p(1)? - p(0)?, p(2)? - p(3)?))
}

/// Mean of two dB quantities.
pub fn average_db<T: Real>(blue: T, red: T) -> T {
    (blue + red) / T::lit(2.0)
}

/// `(R10, R23)` averaged in dB over the two sideband groups.
pub fn average_ratios<T: Real>(blue: &ToneReport<T>, red: &ToneReport<T>) -> Result<(T, T)> {
    let (b10, b23) = power_ratios(blue)?;
    let (r10, r23) = power_ratios(red)?;
    Ok((average_db(b10, r10), average_db(b23, r23)))
}

/// `(ΔP₁, ΔP₂)`: gate-tone power change with predistortion, dB.
pub fn delta_p<T: Real>(dpd: &ToneReport<T>, nodpd: &ToneReport<T>) -> Result<(T, T)> {
    if dpd.sideband != nodpd.sideband {
        return Err(invalid("delta_p compares reports from different sidebands"));
    }
    Ok((
        dpd.absolute_db(1)? - nodpd.absolute_db(1)?,
        dpd.absolute_db(2)? - nodpd.absolute_db(2)?,
    ))
}
