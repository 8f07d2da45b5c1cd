//! Phase-space trajectory, geometric phase and Bell-state fidelity of a
//! multi-tone entangling gate.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::quad::integrate;
use crate::numeric::roots::bisect;
use crate::scalar::{two_pi, Real};
use crate::spectral::ToneReport;

pub const DEFAULT_NBAR: f64 = 0.1;
pub const DEFAULT_ETA_LD: f64 = 0.026;
/// Relative tolerance of the geometric-phase quadrature.
pub const PHASE_REL_TOL: f64 = 1e-12;
/// Infidelity targets of the threshold table.
pub const THRESHOLD_TARGETS: [f64; 3] = [1e-2, 1e-3, 1e-4];
/// Search bracket for the threshold bisection, dB.
pub const THRESHOLD_BRACKET_DB: (f64, f64) = (0.0, 100.0);

/// One drive tone at detuning `n·ξ₀` from the motional sideband.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DriveTone<T> {
    pub harmonic: u32,
    pub amplitude: T,
    #[serde(default)]
    pub phase: T,
}

impl<T: Real> DriveTone<T> {
    pub fn new(harmonic: u32, amplitude: T) -> Self {
        Self {
            harmonic,
            amplitude,
            phase: T::zero(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct DriveSpectrum<T> {
    pub tones: Vec<DriveTone<T>>,
    /// Gate detuning, Hz.
    pub xi0: f64,
    pub eta_ld: T,
    /// Rabi frequency, rad/s, once calibrated.
    pub omega: Option<T>,
}

impl<T: Real> DriveSpectrum<T> {
    pub fn new(tones: Vec<DriveTone<T>>, xi0: f64, eta_ld: T) -> Self {
        Self {
            tones,
            xi0,
            eta_ld,
            omega: None,
        }
    }

    /// Cardioid(1,2) with `Σ r²/n = 1`.
    pub fn cardioid(xi0: f64, eta_ld: T) -> Self {
        let r = T::one() / T::lit(1.5).sqrt();
        Self::new(vec![DriveTone::new(1, r), DriveTone::new(2, -r)], xi0, eta_ld)
    }

    pub fn with_tone(mut self, tone: DriveTone<T>) -> Self {
        self.tones.push(tone);
        self.omega = None;
        self
    }

    pub fn gate_time(&self) -> f64 {
        1.0 / self.xi0
    }

    /// `Σ r_n²/n` over the gate tones `n ∈ {1, 2}`.
    pub fn gate_norm(&self) -> T {
        self.tones
            .iter()
            .filter(|t| t.harmonic == 1 || t.harmonic == 2)
            .map(|t| t.amplitude * t.amplitude / T::from_usize_lossy(t.harmonic as usize))
            .sum()
    }

    /// Sets `Ω` from the gate tones alone.
    pub fn calibrated(mut self) -> Result<Self> {
        self.omega = Some(calibrate_omega(&self)?);
        Ok(self)
    }

    /// `ηΩ/ξ₀`, the dimensionless coupling.
    fn coupling(&self) -> Result<T> {
        let omega = self.omega.ok_or(Error::UncalibratedSpectrum)?;
        Ok(self.eta_ld * omega / T::lit(self.xi0))
    }

    fn validate(&self) -> Result<()> {
        if !(self.xi0 > 0.0 && self.xi0.is_finite()) {
            return Err(invalid("gate detuning must be positive"));
        }
        if !(self.eta_ld > T::zero()) {
            return Err(invalid("Lamb-Dicke parameter must be positive"));
        }
        for t in &self.tones {
            if !(t.amplitude.is_finite() && t.phase.is_finite()) {
                return Err(invalid("tone amplitudes and phases must be finite"));
            }
            if t.harmonic == 0 && t.phase.sin().abs() > T::lit(1e-12) {
                return Err(invalid("a resonant (n = 0) tone must have phase 0 or π"));
            }
        }
        Ok(())
    }
}

/// `Ω = (πξ₀/η)·(Σ_gate r_n²/n)^{−1/2}`, rad/s.
pub fn calibrate_omega<T: Real>(spectrum: &DriveSpectrum<T>) -> Result<T> {
    spectrum.validate()?;
    for n in [1, 2] {
        if !spectrum
            .tones
            .iter()
            .any(|t| t.harmonic == n && t.amplitude != T::zero())
        {
            return Err(Error::InvalidGateTones { harmonic: n as u8 });
        }
    }
    let norm = spectrum.gate_norm();
    Ok(T::PI() * T::lit(spectrum.xi0) / spectrum.eta_ld / norm.sqrt())
}

/// `(F, G)` and `dG/dτ` at reduced time `τ = t/T_g`.
fn phase_space_at<T: Real>(tones: &[DriveTone<T>], k: T, tau: T) -> (T, T, T) {
    let two_pi = two_pi::<T>();
    let sqrt2 = T::SQRT_2();
    let c = sqrt2 * k / two_pi;
    let (mut f, mut g, mut dg) = (T::zero(), T::zero(), T::zero());
    for t in tones {
        if t.harmonic == 0 {
            // n → 0 limit; the phase (0 or π) is folded into the sign
            f = f - sqrt2 * k * t.amplitude * t.phase.cos() * tau;
            continue;
        }
        let n = T::from_usize_lossy(t.harmonic as usize);
        let cycles = n * tau;
        let theta = two_pi * (cycles - cycles.floor()) + t.phase;
        let (s, co) = theta.sin_cos();
        f = f - c * t.amplitude / n * s;
        g = g + c * t.amplitude / n * (T::one() - co);
        dg = dg + c * t.amplitude * two_pi * s;
    }
    (f, g, dg)
}

/// `(F(t), G(t))` for `t` in seconds.
pub fn trajectory<T: Real>(spectrum: &DriveSpectrum<T>, t: f64) -> Result<(T, T)> {
    spectrum.validate()?;
    let k = spectrum.coupling()?;
    let (f, g, _) = phase_space_at(&spectrum.tones, k, T::lit(t / spectrum.gate_time()));
    Ok((f, g))
}

/// `Φ(t) = −∫₀ᵗ F dG` by adaptive quadrature.
pub fn geometric_phase<T: Real>(spectrum: &DriveSpectrum<T>, t_end: f64) -> Result<T> {
    spectrum.validate()?;
    let k = spectrum.coupling()?;
    let end = T::lit(t_end / spectrum.gate_time());
    let q = integrate(
        |tau: T| {
            let (f, _, dg) = phase_space_at(&spectrum.tones, k, tau);
            -f * dg
        },
        T::zero(),
        end,
        PHASE_REL_TOL,
        1e-15,
    )?;
    Ok(q.value)
}

/// Closed-form `Φ(T_g)` when every tone has a nonzero integer harmonic:
/// `(ηΩ/ξ₀)²/(2π)·Σ_n |Σ r e^{iφ}|²/n`.
pub fn closed_form_phase<T: Real>(spectrum: &DriveSpectrum<T>) -> Result<Option<T>> {
    spectrum.validate()?;
    let k = spectrum.coupling()?;
    if spectrum.tones.iter().any(|t| t.harmonic == 0) {
        return Ok(None);
    }
    let mut harmonics: Vec<u32> = spectrum.tones.iter().map(|t| t.harmonic).collect();
    harmonics.sort_unstable();
    harmonics.dedup();
    let sum: T = harmonics
        .iter()
        .map(|&n| {
            let (re, im) = spectrum
                .tones
                .iter()
                .filter(|t| t.harmonic == n)
                .fold((T::zero(), T::zero()), |(re, im), t| {
                    (re + t.amplitude * t.phase.cos(), im + t.amplitude * t.phase.sin())
                });
            (re * re + im * im) / T::from_usize_lossy(n as usize)
        })
        .sum();
    Ok(Some(k * k / (T::lit(2.0) * T::PI()) * sum))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TracePoint<T> {
    pub t: f64,
    pub f: T,
    pub g: T,
}

/// Displacements and geometric phase at the gate time.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct PhaseSpaceOutcome<T> {
    pub f: T,
    pub g: T,
    pub phi: T,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TracePoint<T>>>,
}

pub fn outcome<T: Real>(spectrum: &DriveSpectrum<T>) -> Result<PhaseSpaceOutcome<T>> {
    let tg = spectrum.gate_time();
    let (f, g) = trajectory(spectrum, tg)?;
    let phi = geometric_phase(spectrum, tg)?;
    Ok(PhaseSpaceOutcome { f, g, phi, trace: None })
}

/// [`outcome`] plus `n_samples` uniformly spaced points on `[0, T_g]`.
pub fn phase_space_trace<T: Real>(spectrum: &DriveSpectrum<T>, n_samples: usize) -> Result<PhaseSpaceOutcome<T>> {
    if n_samples < 2 {
        return Err(invalid("a trace needs at least two samples"));
    }
    let tg = spectrum.gate_time();
    let last = (n_samples - 1) as f64;
    let trace = (0..n_samples)
        .map(|i| {
            let t = tg * (i as f64 / last);
            trajectory(spectrum, t).map(|(f, g)| TracePoint { t, f, g })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = outcome(spectrum)?;
    out.trace = Some(trace);
    Ok(out)
}

/// `1 − 𝓕`, written so every term is non-negative.
pub fn infidelity<T: Real>(out: &PhaseSpaceOutcome<T>, nbar: T) -> T {
    let a = nbar + T::lit(0.5);
    let s = out.f * out.f + out.g * out.g;
    let x = out.phi + out.f * out.g / T::lit(2.0);
    let c = x.cos();
    -(-T::lit(4.0) * a * s).exp_m1() / T::lit(8.0) - (-a * s).exp_m1() / T::lit(2.0)
        + (-a * s).exp() * c * c / T::lit(2.0)
}

/// Bell-state fidelity of a thermal mode with mean occupation `nbar`.
pub fn fidelity<T: Real>(out: &PhaseSpaceOutcome<T>, nbar: T) -> T {
    let a = nbar + T::lit(0.5);
    let s = out.f * out.f + out.g * out.g;
    let x = out.phi + out.f * out.g / T::lit(2.0);
    let sx = x.sin();
    (T::lit(3.0) + (-T::lit(4.0) * a * s).exp()) / T::lit(8.0) + (-a * s).exp() / T::lit(2.0) * sx * sx
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct FidelityEstimate<T> {
    pub value: T,
    pub nbar: T,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blue: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub red: Option<T>,
}

impl<T: Real> FidelityEstimate<T> {
    pub fn infidelity(&self) -> T {
        T::one() - self.value
    }
}

/// Settings for turning a tone report into a drive spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateOptions<T> {
    pub xi0: f64,
    pub eta_ld: T,
    /// Sign of the resonant IM product.
    pub n0_sign: T,
    /// Sign of the `n = 3` IM product.
    pub n3_sign: T,
}

impl<T: Real> Default for EstimateOptions<T> {
    fn default() -> Self {
        Self {
            xi0: crate::waveform::DEFAULT_XI0,
            eta_ld: T::lit(DEFAULT_ETA_LD),
            n0_sign: -T::one(),
            n3_sign: T::one(),
        }
    }
}

/// Signed drive spectrum from measured tone powers: amplitudes normalized to
/// `|r₁| = 1`, Cardioid signs on the gate tones, cubic-model signs on the IM
/// tones, gate tones rescaled to `Σ r²/n = 1`, `Ω` from the gate tones.
pub fn spectrum_from_report<T: Real>(report: &ToneReport<T>, opts: &EstimateOptions<T>) -> Result<DriveSpectrum<T>> {
    for n in [1u8, 2] {
        if !report.tone(n)?.valid {
            return Err(Error::InvalidGateTones { harmonic: n });
        }
    }
    let amp = |n: u8| -> Result<T> {
        let p = report.tone(n)?.power_db;
        Ok(if p.is_finite() {
            T::lit(10.0).powf(p / T::lit(20.0))
        } else {
            T::zero()
        })
    };
    let r1 = amp(1)?;
    if !(r1 > T::zero()) {
        return Err(Error::InvalidGateTones { harmonic: 1 });
    }
    let rel = |n: u8| amp(n).map(|a| a / r1);
    let (a0, a2, a3) = (rel(0)?, rel(2)?, rel(3)?);
    let scale = (T::one() + a2 * a2 / T::lit(2.0)).sqrt().recip();
    let tones = vec![
        DriveTone::new(0, opts.n0_sign * a0 * scale),
        DriveTone::new(1, scale),
        DriveTone::new(2, -a2 * scale),
        DriveTone::new(3, opts.n3_sign * a3 * scale),
    ];
    DriveSpectrum::new(tones, opts.xi0, opts.eta_ld).calibrated()
}

/// Fidelity estimate from one sideband group.
pub fn estimate_from_tones<T: Real>(
    report: &ToneReport<T>,
    nbar: T,
    opts: &EstimateOptions<T>,
) -> Result<FidelityEstimate<T>> {
    let out = outcome(&spectrum_from_report(report, opts)?)?;
    Ok(FidelityEstimate {
        value: fidelity(&out, nbar),
        nbar,
        blue: None,
        red: None,
    })
}

/// Arithmetic mean of the blue and red estimates.
pub fn estimate_from_sidebands<T: Real>(
    blue: &ToneReport<T>,
    red: &ToneReport<T>,
    nbar: T,
    opts: &EstimateOptions<T>,
) -> Result<FidelityEstimate<T>> {
    let b = estimate_from_tones(blue, nbar, opts)?.value;
    let r = estimate_from_tones(red, nbar, opts)?.value;
    Ok(FidelityEstimate {
        value: (b + r) / T::lit(2.0),
        nbar,
        blue: Some(b),
        red: Some(r),
    })
}

/// Infidelity of the normalized Cardioid with one IM tone at harmonic `n`,
/// `ratio_db` below the single gate-tone power.
pub fn im_infidelity<T: Real>(harmonic: u32, ratio_db: T, nbar: T, opts: &EstimateOptions<T>) -> Result<T> {
    let base = DriveSpectrum::cardioid(opts.xi0, opts.eta_ld);
    let r1 = base.tones[0].amplitude;
    let sign = match harmonic {
        0 => opts.n0_sign,
        3 => opts.n3_sign,
        _ => T::one(),
    };
    let r = sign * r1 * T::lit(10.0).powf(-ratio_db / T::lit(20.0));
    let s = base.with_tone(DriveTone::new(harmonic, r)).calibrated()?;
    Ok(infidelity(&outcome(&s)?, nbar))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ThresholdRow<T> {
    pub infidelity: T,
    pub n0_db: T,
    pub n3_db: T,
}

/// Gate-to-IM power ratio at which the infidelity falls to `target`.
pub fn im_threshold<T: Real>(harmonic: u32, target: T, nbar: T, opts: &EstimateOptions<T>) -> Result<T> {
    let (lo, hi) = THRESHOLD_BRACKET_DB;
    let steps = 200;
    let mut prev = T::infinity();
    for i in 0..=steps {
        let db = T::lit(lo + (hi - lo) * i as f64 / steps as f64);
        let e = im_infidelity(harmonic, db, nbar, opts)?;
        if e > prev {
            return Err(Error::NoConvergence(format!(
                "infidelity is not monotone in the IM ratio near {db} dB (n = {harmonic})"
            )));
        }
        prev = e;
    }
    let f = |db: T| {
        im_infidelity(harmonic, db, nbar, opts)
            .map(|e| e.ln() - target.ln())
            .unwrap_or(T::nan())
    };
    if f(T::lit(hi)) > T::zero() {
        return Err(Error::BudgetNotCrossed {
            budget: target.as_f64(),
        });
    }
    if f(T::lit(lo)) < T::zero() {
        return Ok(T::lit(lo));
    }
    bisect(f, T::lit(lo), T::lit(hi), T::lit(1e-9))
}

/// Required ratios for `n = 0` and `n = 3` at each target infidelity.
pub fn im_threshold_table<T: Real>(targets: &[T], nbar: T, opts: &EstimateOptions<T>) -> Result<Vec<ThresholdRow<T>>> {
    targets
        .iter()
        .map(|&t| {
            Ok(ThresholdRow {
                infidelity: t,
                n0_db: im_threshold(0, t, nbar, opts)?,
                n3_db: im_threshold(3, t, nbar, opts)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{ExtractionMethod, Sideband, ToneMeasurement};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    const XI0: f64 = 1e3;
    const ETA: f64 = 0.026;

    fn ideal() -> DriveSpectrum<f64> {
        DriveSpectrum::cardioid(XI0, ETA).calibrated().unwrap()
    }

    fn with(n: u32, r: f64) -> DriveSpectrum<f64> {
        DriveSpectrum::cardioid(XI0, ETA)
            .with_tone(DriveTone::new(n, r))
            .calibrated()
            .unwrap()
    }

    #[test]
    fn omega_calibration() {
        assert_abs_diff_eq!(
            ideal().omega.unwrap(),
            PI * 1e3 / 0.026,
            epsilon = 1e-12 * PI * 1e3 / 0.026
        );
        let raw = DriveSpectrum::new(vec![DriveTone::new(1, 1.0), DriveTone::new(2, -1.0)], XI0, ETA);
        let o1 = calibrate_omega(&raw).unwrap();
        assert_abs_diff_eq!(o1, PI * 1e3 / (0.026 * 1.5f64.sqrt()), epsilon = 1e-9);
        let doubled = DriveSpectrum::new(vec![DriveTone::new(1, 2.0), DriveTone::new(2, -2.0)], XI0, ETA);
        assert_abs_diff_eq!(calibrate_omega(&doubled).unwrap(), o1 / 2.0, epsilon = 1e-9);
        let lonely = DriveSpectrum::new(vec![DriveTone::new(1, 1.0)], XI0, ETA);
        assert!(matches!(
            calibrate_omega(&lonely),
            Err(Error::InvalidGateTones { harmonic: 2 })
        ));
    }

    #[test]
    fn uncalibrated_is_an_error() {
        let s = DriveSpectrum::cardioid(XI0, ETA);
        assert!(matches!(trajectory(&s, 0.0), Err(Error::UncalibratedSpectrum)));
        assert!(matches!(geometric_phase(&s, 1e-3), Err(Error::UncalibratedSpectrum)));
    }

    #[test]
    fn ideal_gate() {
        let s = ideal();
        let out = outcome(&s).unwrap();
        assert!(out.f.abs() < 1e-12 && out.g.abs() < 1e-12);
        assert_abs_diff_eq!(out.phi, FRAC_PI_2, epsilon = 1e-6);
        assert_abs_diff_eq!(closed_form_phase(&s).unwrap().unwrap(), FRAC_PI_2, epsilon = 1e-12);
        assert_abs_diff_eq!(fidelity(&out, 0.1), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn zero_spectrum_has_no_phase() {
        let mut s = ideal();
        for t in s.tones.iter_mut() {
            t.amplitude = 0.0;
        }
        assert_eq!(geometric_phase(&s, s.gate_time()).unwrap(), 0.0);
    }

    #[test]
    fn resonant_tone_endpoint() {
        let out = outcome(&with(0, 0.1)).unwrap();
        // F = −√2·π·r₀
        assert_abs_diff_eq!(out.f, -2f64.sqrt() * PI * 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(out.f, -0.444, epsilon = 0.005);
        assert!(out.g.abs() < 1e-12);
        // oracle: independent quadrature of the same integrand (external)
        let neg = outcome(&with(0, -0.1)).unwrap();
        assert_abs_diff_eq!(neg.f, 0.444_288_293_815_836_6, epsilon = 1e-12);
        assert_abs_diff_eq!(neg.phi, 1.699_051_309_811_083_5, epsilon = 1e-9);
    }

    #[test]
    fn linear_growth_of_resonant_tone() {
        let s = DriveSpectrum::new(
            vec![DriveTone::new(0, 0.3), DriveTone::new(1, 0.8), DriveTone::new(2, -0.8)],
            XI0,
            ETA,
        )
        .calibrated()
        .unwrap();
        let solo = DriveSpectrum {
            tones: vec![s.tones[0]],
            ..s.clone()
        };
        let rate = -2f64.sqrt() * ETA * s.omega.unwrap() * 0.3;
        for t in [1e-5, 3.3e-4, 1e-3] {
            let (f, g) = trajectory(&solo, t).unwrap();
            assert!((f / t - rate).abs() < 1e-12 * rate.abs());
            assert_eq!(g, 0.0);
        }
    }

    #[test]
    fn integer_harmonics_close() {
        let out = outcome(&with(3, 0.1)).unwrap();
        assert!(out.f.abs() < 1e-12 && out.g.abs() < 1e-12);
        let phased = DriveSpectrum::cardioid(XI0, ETA)
            .with_tone(DriveTone {
                harmonic: 5,
                amplitude: 0.4,
                phase: 1.1,
            })
            .calibrated()
            .unwrap();
        let out = outcome(&phased).unwrap();
        let (f0, g0) = trajectory(&phased, 0.0).unwrap();
        assert!((out.f - f0).abs() < 1e-12 && (out.g - g0).abs() < 1e-12);
    }

    #[test]
    fn n3_perturbs_phase_only_slightly() {
        let r1 = 1.0 / 1.5f64.sqrt();
        let s = with(3, 0.1 * r1);
        let phi = outcome(&s).unwrap().phi;
        // oracle: quadrature at a tolerance 1000× looser agrees, closed form exact
        let expect = FRAC_PI_2 * (1.0 + (0.1 * r1).powi(2) / 3.0);
        assert_abs_diff_eq!(phi, expect, epsilon = 1e-12);
        let coarse = integrate(
            |tau: f64| {
                let (f, _, dg) = phase_space_at(&s.tones, PI, tau);
                -f * dg
            },
            0.0,
            1.0,
            1e-9,
            0.0,
        )
        .unwrap();
        assert_abs_diff_eq!(coarse.value, phi, epsilon = 1e-8);
        assert!(phi - FRAC_PI_2 > 0.0 && phi - FRAC_PI_2 < 0.01);
    }

    #[test]
    fn resonant_cross_term_matches_analytic_integral() {
        // −∫F₀dG = −(k²/π)·r₀·Σ r_n cos φ_n / n for a linear F₀
        let r0 = -0.07;
        let s = with(0, r0);
        let r1 = 1.0 / 1.5f64.sqrt();
        let expect = FRAC_PI_2 - PI * r0 * (r1 - r1 / 2.0);
        assert_abs_diff_eq!(outcome(&s).unwrap().phi, expect, epsilon = 1e-11);
    }

    #[test]
    fn fidelity_formula() {
        let o = |f, g, phi| PhaseSpaceOutcome { f, g, phi, trace: None };
        assert_abs_diff_eq!(fidelity(&o(0.0, 0.0, FRAC_PI_2), 3.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(fidelity(&o(0.0, 0.0, 0.0), 0.1), 0.5, epsilon = 1e-15);
        // hand evaluation: s = 0.444², a = 0.6
        let s: f64 = 0.444 * 0.444;
        let hand = (3.0 + (-2.4 * s).exp()) / 8.0 + (-0.6 * s).exp() / 2.0;
        assert_abs_diff_eq!(fidelity(&o(-0.444, 0.0, FRAC_PI_2), 0.1), hand, epsilon = 1e-15);
        assert_abs_diff_eq!(hand, 0.897_104_33, epsilon = 1e-8);
    }

    #[test]
    fn trace_endpoints() {
        let t = phase_space_trace(&ideal(), 101).unwrap();
        let tr = t.trace.as_ref().unwrap();
        assert_eq!(tr.len(), 101);
        assert!(tr[0].f.abs() < 1e-15 && tr[0].g.abs() < 1e-15);
        assert!(tr[100].f.abs() < 1e-12 && tr[100].g.abs() < 1e-12);

        let s = with(0, 0.1);
        let t = phase_space_trace(&s, 257).unwrap();
        let end = *t.trace.as_ref().unwrap().last().unwrap();
        assert_eq!((end.f, end.g), trajectory(&s, s.gate_time()).unwrap());
        assert_eq!(end.f, t.f);
        assert_abs_diff_eq!(end.f, -0.444, epsilon = 0.005);
    }

    fn report(p0: f64, p3: f64) -> ToneReport<f64> {
        let m = |p: f64, method| ToneMeasurement {
            power_db: p,
            freq_error: 0.0,
            snr_db: 80.0,
            valid: true,
            method,
        };
        ToneReport {
            sideband: Sideband::Blue,
            reference_db: 0.0,
            tones: [
                (0, m(p0, ExtractionMethod::DirectSample)),
                (1, m(0.0, ExtractionMethod::PeakSearch)),
                (2, m(0.0, ExtractionMethod::PeakSearch)),
                (3, m(p3, ExtractionMethod::DirectSample)),
            ]
            .into_iter()
            .collect(),
        }
    }

    #[test]
    fn estimate_from_ideal_report() {
        let o = EstimateOptions::default();
        let e = estimate_from_tones(&report(f64::NEG_INFINITY, f64::NEG_INFINITY), 0.1, &o).unwrap();
        assert_abs_diff_eq!(e.value, 1.0, epsilon = 1e-12);
        let mut bad = report(-60.0, -60.0);
        bad.tones.get_mut(&2).unwrap().valid = false;
        assert!(matches!(
            estimate_from_tones(&bad, 0.1, &o),
            Err(Error::InvalidGateTones { harmonic: 2 })
        ));
    }

    #[test]
    fn estimate_matches_direct_spectrum() {
        let o = EstimateOptions::default();
        let e = estimate_from_tones(&report(-40.0, -25.0), 0.1, &o).unwrap();
        let r1 = 1.0 / 1.5f64.sqrt();
        let s = DriveSpectrum::cardioid(o.xi0, ETA)
            .with_tone(DriveTone::new(0, -r1 * 0.01))
            .with_tone(DriveTone::new(3, r1 * 10f64.powf(-25.0 / 20.0)))
            .calibrated()
            .unwrap();
        assert_abs_diff_eq!(e.value, fidelity(&outcome(&s).unwrap(), 0.1), epsilon = 1e-12);
        let both = estimate_from_sidebands(&report(-40.0, -25.0), &report(-50.0, -25.0), 0.1, &o).unwrap();
        assert_abs_diff_eq!(
            both.value,
            (both.blue.unwrap() + both.red.unwrap()) / 2.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn n3_threshold_has_closed_form() {
        // Φ = (π/2)(1 + r₃²/3), r₃² = (2/3)·10^{−R/10}: 1 − 𝓕 = cos²Φ/2
        let o = EstimateOptions::default();
        for target in THRESHOLD_TARGETS {
            let db = im_threshold(3, target, 0.1, &o).unwrap();
            let delta = (2.0 * target).sqrt().asin();
            let expect = -10.0 * (delta * 9.0 / PI).log10();
            assert_abs_diff_eq!(db, expect, epsilon = 1e-6);
        }
    }

    #[test]
    fn n0_thresholds_frozen() {
        // oracle: independent bisection with external quadrature
        let o = EstimateOptions::default();
        let rows = im_threshold_table(&THRESHOLD_TARGETS, 0.1, &o).unwrap();
        let expect = [29.21, 39.26, 49.26];
        for (r, e) in rows.iter().zip(expect) {
            assert_abs_diff_eq!(r.n0_db, e, epsilon = 0.01);
        }
    }

    #[test]
    fn unreachable_budget() {
        let o = EstimateOptions::default();
        assert!(matches!(
            im_threshold(3, 1e-30, 0.1, &o),
            Err(Error::BudgetNotCrossed { .. })
        ));
    }

    #[test]
    fn resonant_phase_must_be_real() {
        let s = DriveSpectrum::cardioid(XI0, ETA).with_tone(DriveTone {
            harmonic: 0,
            amplitude: 0.1,
            phase: 0.3,
        });
        assert!(s.calibrated().is_err());
        let s = DriveSpectrum::cardioid(XI0, ETA).with_tone(DriveTone {
            harmonic: 0,
            amplitude: 0.1,
            phase: PI,
        });
        let f = outcome(&s.calibrated().unwrap()).unwrap().f;
        assert_abs_diff_eq!(f, 2f64.sqrt() * PI * 0.1, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn closure_for_integer_harmonics(
            tones in proptest::collection::vec((1u32..8, -2.0f64..2.0, -3.2f64..3.2), 0..5)
        ) {
            let mut s = DriveSpectrum::cardioid(XI0, ETA);
            for (n, r, p) in tones {
                s = s.with_tone(DriveTone { harmonic: n, amplitude: r, phase: p });
            }
            let s = s.calibrated().unwrap();
            let out = outcome(&s).unwrap();
            let (f0, g0) = trajectory(&s, 0.0).unwrap();
            prop_assert!((out.f - f0).abs() < 1e-12 && (out.g - g0).abs() < 1e-12);
            let cf = closed_form_phase(&s).unwrap().unwrap();
            prop_assert!((out.phi - cf).abs() <= 1e-9 * cf.abs().max(1.0));
        }

        #[test]
        fn fidelity_bounds(f in -3.0f64..3.0, g in -3.0f64..3.0, phi in -7.0f64..7.0, nbar in 0.0f64..5.0) {
            let o = PhaseSpaceOutcome { f, g, phi, trace: None };
            let v = fidelity(&o, nbar);
            prop_assert!((3.0 / 8.0 - 1e-12..=1.0 + 1e-12).contains(&v));
            prop_assert!((1.0 - v - infidelity(&o, nbar)).abs() < 1e-12);
        }
    }
}
