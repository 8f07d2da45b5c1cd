//! Memoryless modulator model and diffraction efficiency.

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::numeric::spline::Cubic;
use crate::scalar::Real;
use crate::transfer::{PolynomialTransfer, PredistortionMap, ResponseKind};
use crate::waveform::{normalize_peak, predistort, GateSpec, IqWaveform};

/// Peak first-order diffraction efficiency.
pub const DEFAULT_ETA_REF: f64 = 0.80;
/// Size of the default drive grid for efficiency curves.
pub const EFFICIENCY_GRID: usize = 100;

/// Optical field envelope, `|y| ∝ √P`.
#[derive(Debug, Clone, PartialEq)]
pub struct OpticalWaveform<T> {
    pub sample_rate: f64,
    pub samples: Vec<Complex<T>>,
    pub spec: Option<GateSpec>,
    pub dpd: bool,
    pub with_phase: bool,
}

impl<T: Real> OpticalWaveform<T> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean_power(&self) -> T {
        let n = T::from_usize_lossy(self.samples.len().max(1));
        self.samples.iter().map(|s| s.norm_sqr()).sum::<T>() / n
    }
}

fn check_kind<T: Real>(t: &PolynomialTransfer<T>, expected: ResponseKind) -> Result<()> {
    if t.kind() == expected {
        Ok(())
    } else {
        Err(Error::KindMismatch {
            expected: expected.name(),
            found: t.kind().name(),
        })
    }
}

/// `f_AM(|x|)·exp[i(arg x + f_PM(|x|))]`, `|x|` clipped to 1.
#[inline]
pub fn forward_sample<T: Real>(
    x: Complex<T>,
    amp: &PolynomialTransfer<T>,
    phase: Option<&PolynomialTransfer<T>>,
) -> Complex<T> {
    let mag = x.norm();
    if mag == T::zero() {
        return Complex::new(T::zero(), T::zero());
    }
    let unit = x / mag;
    let y = unit * amp.evaluate(mag);
    match phase {
        Some(p) => y * Complex::from_polar(T::one(), p.evaluate(mag)),
        None => y,
    }
}

/// Propagates an envelope through the modulator.
pub fn forward<T: Real>(
    w: &IqWaveform<T>,
    amp: &PolynomialTransfer<T>,
    phase: Option<&PolynomialTransfer<T>>,
) -> Result<OpticalWaveform<T>> {
    check_kind(amp, ResponseKind::Amplitude)?;
    if let Some(p) = phase {
        check_kind(p, ResponseKind::Phase)?;
    }
    let samples = w.samples.par_iter().map(|&x| forward_sample(x, amp, phase)).collect();
    Ok(OpticalWaveform {
        sample_rate: w.sample_rate,
        samples,
        spec: w.spec.clone(),
        dpd: w.dpd,
        with_phase: phase.is_some(),
    })
}

/// Instantaneous efficiency `η_ref·f(A)²/f(1)²`.
pub fn eta_instant<T: Real>(a: T, amp: &PolynomialTransfer<T>, eta_ref: T) -> Result<T> {
    let full = amp.a_corr()?;
    let y = amp.evaluate(a);
    Ok(eta_ref * y * y / (full * full))
}

/// Time-averaged efficiency `η_ref·mean|f(w_i)|²/f(1)²` of a drive record.
pub fn eta_bar<T: Real>(w: &IqWaveform<T>, amp: &PolynomialTransfer<T>, eta_ref: T) -> Result<T> {
    if w.is_empty() {
        return Err(invalid("empty waveform"));
    }
    let full = amp.a_corr()?;
    let p: T = w
        .samples
        .iter()
        .map(|s| amp.evaluate(s.norm().min(T::one())).powi(2))
        .sum();
    Ok(eta_ref * p / (T::from_usize_lossy(w.len()) * full * full))
}

/// `η̄(A)` tabulated on a drive grid, with spline lookup.
#[derive(Debug, Clone)]
pub struct EfficiencyCurve<T> {
    pub drives: Vec<T>,
    pub eta_bar: Vec<T>,
    pub dpd: bool,
    interp: Cubic<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct EfficiencyRow<T> {
    pub a: T,
    pub eta_bar_nodpd: T,
    pub eta_bar_dpd: T,
}

impl<T: Real> EfficiencyCurve<T> {
    pub fn new(drives: Vec<T>, eta_bar: Vec<T>, dpd: bool) -> Result<Self> {
        let interp = Cubic::natural_or_monotone(&drives, &eta_bar)?;
        Ok(Self {
            drives,
            eta_bar,
            dpd,
            interp,
        })
    }

    pub fn eval(&self, a: T) -> T {
        self.interp.eval(a)
    }

    pub fn is_monotone(&self) -> bool {
        self.eta_bar.windows(2).all(|w| w[1] >= w[0])
    }

    /// Pairs a no-DPD and a DPD curve on the same grid.
    pub fn rows(nodpd: &Self, dpd: &Self) -> Result<Vec<EfficiencyRow<T>>> {
        if nodpd.drives != dpd.drives {
            return Err(invalid("efficiency curves use different drive grids"));
        }
        Ok(nodpd
            .drives
            .iter()
            .zip(nodpd.eta_bar.iter().zip(&dpd.eta_bar))
            .map(|(&a, (&n, &d))| EfficiencyRow {
                a,
                eta_bar_nodpd: n,
                eta_bar_dpd: d,
            })
            .collect())
    }
}

/// Uniform grid `k/n`, `k = 1..=n`.
pub fn default_drive_grid<T: Real>(n: usize) -> Vec<T> {
    (1..=n)
        .map(|k| T::from_usize_lossy(k) / T::from_usize_lossy(n))
        .collect()
}

/// Efficiency of the gate shape `shape` rescaled to each drive in `grid`,
/// predistorted when `map` is given.
pub fn eta_bar_grid<T: Real>(
    shape: &IqWaveform<T>,
    amp: &PolynomialTransfer<T>,
    map: Option<&PredistortionMap<T>>,
    grid: &[T],
    eta_ref: T,
) -> Result<EfficiencyCurve<T>> {
    let values = grid
        .par_iter()
        .map(|&a| {
            if a == T::zero() {
                return Ok(T::zero());
            }
            let w = normalize_peak(shape, a)?;
            let w = match map {
                Some(m) => predistort(&w, m)?,
                None => w,
            };
            eta_bar(&w, amp, eta_ref)
        })
        .collect::<Result<Vec<T>>>()?;
    EfficiencyCurve::new(grid.to_vec(), values, map.is_some())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transfer::{reference_model, REFERENCE_A_CORR, REFERENCE_PHASE_AT_FULL_DRIVE};
    use crate::waveform::{synth_cardioid, DEFAULT_NU, DEFAULT_XI0};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn cardioid(a: f64, fs: f64) -> IqWaveform<f64> {
        synth_cardioid(&GateSpec::cardioid(DEFAULT_NU, DEFAULT_XI0, a), fs, 1).unwrap()
    }

    #[test]
    fn identity_passes_through() {
        let w = IqWaveform::new(1.0, vec![Complex::new(0.3, -0.2), Complex::new(-0.5, 0.0)]);
        let y = forward(&w, &PolynomialTransfer::identity(), None).unwrap();
        for (a, b) in y.samples.iter().zip(&w.samples) {
            assert_abs_diff_eq!(a.re, b.re, epsilon = 1e-15);
            assert_abs_diff_eq!(a.im, b.im, epsilon = 1e-15);
        }
    }

    #[test]
    fn full_drive_endpoint() {
        let m = reference_model::<f64>();
        let w = IqWaveform::from_real(1.0, [1.0; 3]);
        let y = forward(&w, &m.amplitude, Some(&m.phase)).unwrap();
        for s in &y.samples {
            assert_abs_diff_eq!(s.norm(), REFERENCE_A_CORR, epsilon = 1e-5);
            assert_abs_diff_eq!(s.arg(), REFERENCE_PHASE_AT_FULL_DRIVE, epsilon = 1e-9);
        }
        // negative real drive: odd amplitude, even phase
        let y = forward(&IqWaveform::from_real(1.0, [-1.0]), &m.amplitude, Some(&m.phase)).unwrap();
        let expect = Complex::from_polar(-REFERENCE_A_CORR, REFERENCE_PHASE_AT_FULL_DRIVE);
        assert_abs_diff_eq!(y.samples[0].re, expect.re, epsilon = 1e-5);
        assert_abs_diff_eq!(y.samples[0].im, expect.im, epsilon = 1e-5);
    }

    #[test]
    fn kind_mismatch() {
        let m = reference_model::<f64>();
        let w = IqWaveform::from_real(1.0, [0.5]);
        assert!(matches!(forward(&w, &m.phase, None), Err(Error::KindMismatch { .. })));
        assert!(matches!(
            forward(&w, &m.amplitude, Some(&m.amplitude)),
            Err(Error::KindMismatch { .. })
        ));
    }

    #[test]
    fn instantaneous_efficiency() {
        let m = reference_model::<f64>();
        assert_abs_diff_eq!(eta_instant(1.0, &m.amplitude, 0.8).unwrap(), 0.8, epsilon = 1e-15);
        assert_eq!(eta_instant(0.0, &m.amplitude, 0.8).unwrap(), 0.0);
        // oracle: generating curve evaluated externally
        assert_abs_diff_eq!(
            eta_instant(0.5, &m.amplitude, 0.8).unwrap(),
            0.438_380_161_501_05,
            epsilon = 2e-5
        );
    }

    #[test]
    fn average_efficiency() {
        let m = reference_model::<f64>();
        let full = IqWaveform::from_real(1.0, [1.0; 10]);
        assert_abs_diff_eq!(eta_bar(&full, &m.amplitude, 0.8).unwrap(), 0.8, epsilon = 1e-15);
        let zero = IqWaveform::from_real(1.0, [0.0; 10]);
        assert_eq!(eta_bar(&zero, &m.amplitude, 0.8).unwrap(), 0.0);

        let w = cardioid(0.4, 20e6);
        let direct = 0.8
            * w.samples
                .iter()
                .map(|s| m.amplitude.evaluate(s.re).powi(2))
                .sum::<f64>()
            / (w.len() as f64 * m.amplitude.a_corr().unwrap().powi(2));
        let v = eta_bar(&w, &m.amplitude, 0.8).unwrap();
        assert_abs_diff_eq!(v, direct, epsilon = 1e-15);
        // frozen regression value
        assert_abs_diff_eq!(v, 0.087_738_496_583_416, epsilon = 1e-12);
        // independent evaluation on the generating curve
        assert_abs_diff_eq!(v, 0.087_738_994_186_996, epsilon = 2e-6);
    }

    #[test]
    fn efficiency_curves() {
        let m = reference_model::<f64>();
        let g = m.amplitude.invert().unwrap();
        let shape = cardioid(1.0, 20e6);
        let grid = default_drive_grid::<f64>(EFFICIENCY_GRID);
        let off = eta_bar_grid(&shape, &m.amplitude, None, &grid, 0.8).unwrap();
        let on = eta_bar_grid(&shape, &m.amplitude, Some(&g), &grid, 0.8).unwrap();
        assert!(off.is_monotone() && on.is_monotone());
        let a = g.a_corr();
        assert!(on.eval(a) > off.eval(a));
        for (i, &x) in grid.iter().enumerate() {
            assert_abs_diff_eq!(on.eval(x), on.eta_bar[i], epsilon = 1e-14);
        }
        assert!(on.eta_bar.iter().all(|&e| e <= 0.8));

        let id = PolynomialTransfer::<f64>::identity();
        let gi = id.invert().unwrap();
        let a = eta_bar_grid(&shape, &id, None, &grid, 0.8).unwrap();
        let b = eta_bar_grid(&shape, &id, Some(&gi), &grid, 0.8).unwrap();
        for (x, y) in a.eta_bar.iter().zip(&b.eta_bar) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-9);
        }
        assert_eq!(EfficiencyCurve::rows(&a, &b).unwrap().len(), EFFICIENCY_GRID);
    }

    #[test]
    fn linearized_chain() {
        let m = reference_model::<f64>();
        let g = m.amplitude.invert().unwrap();
        let w = cardioid(g.a_corr(), 20e6);
        let y = forward(&predistort(&w, &g).unwrap(), &m.amplitude, None).unwrap();
        let worst = y
            .samples
            .iter()
            .zip(&w.samples)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-6, "{worst:e}");
    }

    proptest! {
        #[test]
        fn memoryless(xs in proptest::collection::vec(-1.2f64..1.2, 2..30), split in 0usize..30) {
            let m = reference_model::<f64>();
            let split = split.min(xs.len());
            let whole = forward(&IqWaveform::from_real(1.0, xs.iter().copied()), &m.amplitude, Some(&m.phase)).unwrap();
            let a = forward(&IqWaveform::from_real(1.0, xs[..split].iter().copied()), &m.amplitude, Some(&m.phase)).unwrap();
            let b = forward(&IqWaveform::from_real(1.0, xs[split..].iter().copied()), &m.amplitude, Some(&m.phase)).unwrap();
            let joined: Vec<_> = a.samples.into_iter().chain(b.samples).collect();
            prop_assert_eq!(whole.samples, joined);
        }

        #[test]
        fn efficiency_bounded(xs in proptest::collection::vec(-1.0f64..1.0, 1..50)) {
            let m = reference_model::<f64>();
            let e = eta_bar(&IqWaveform::from_real(1.0, xs), &m.amplitude, 0.8).unwrap();
            prop_assert!(e <= 0.8 + 1e-12);
        }
    }
}
