//! Static amplitude and phase response of the modulator: fitting,
//! normalization, evaluation and inversion.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::linalg::least_squares;
use crate::numeric::roots::{bisect, brent};
use crate::numeric::spline::Cubic;
use crate::scalar::Real;

/// Drive below which points are used to estimate the slope at the origin.
pub const ORIGIN_SLOPE_LIMIT: f64 = 0.2;
/// Minimum number of points below [`ORIGIN_SLOPE_LIMIT`].
pub const ORIGIN_SLOPE_MIN_POINTS: usize = 4;
pub const AMPLITUDE_ORDER: usize = 8;
pub const PHASE_ORDER: usize = 5;
pub const PHASE_FIT_RANGE: (f64, f64) = (0.1, 1.0);
pub const INVERSION_TOLERANCE: f64 = 1e-9;
/// Number of grid points for the derivative scan and the inverse lookup.
pub const MONOTONICITY_GRID: usize = 1001;

/// Full-drive optical amplitude of the shipped reference modulator.
pub const REFERENCE_A_CORR: f64 = 0.5655;
/// Full-drive phase of the shipped reference modulator, rad.
pub const REFERENCE_PHASE_AT_FULL_DRIVE: f64 = 0.2776;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResponseKind {
    Amplitude,
    Phase,
}

impl ResponseKind {
    pub fn name(self) -> &'static str {
        match self {
            ResponseKind::Amplitude => "amplitude",
            ResponseKind::Phase => "phase",
        }
    }
}

impl fmt::Display for ResponseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn expect_kind(expected: ResponseKind, found: ResponseKind) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::KindMismatch {
            expected: expected.name(),
            found: found.name(),
        })
    }
}

/// Measured `(drive, response)` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationDataset<T> {
    kind: ResponseKind,
    drives: Vec<T>,
    values: Vec<T>,
}

impl<T: Real> CalibrationDataset<T> {
    /// Validates ordering, range and sign of the samples.
    pub fn new(kind: ResponseKind, points: impl IntoIterator<Item = (T, T)>) -> Result<Self> {
        let (drives, values): (Vec<T>, Vec<T>) = points.into_iter().unzip();
        if drives.is_empty() {
            return Err(invalid("calibration dataset is empty"));
        }
        if drives.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(invalid("calibration dataset contains non-finite values"));
        }
        if drives.iter().any(|&a| a < T::zero() || a > T::one()) {
            return Err(invalid("calibration drives must lie in [0, 1]"));
        }
        if drives.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("calibration drives must be strictly increasing"));
        }
        if kind == ResponseKind::Amplitude && values.iter().any(|&v| v < T::zero()) {
            return Err(invalid("amplitude calibration values must be non-negative"));
        }
        Ok(Self { kind, drives, values })
    }

    /// Samples `f` at the given drives.
    pub fn sample(kind: ResponseKind, drives: &[T], mut f: impl FnMut(T) -> T) -> Result<Self> {
        Self::new(kind, drives.iter().map(|&a| (a, f(a))))
    }

    pub fn kind(&self) -> ResponseKind {
        self.kind
    }

    pub fn drives(&self) -> &[T] {
        &self.drives
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.drives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.drives.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = (T, T)> + '_ {
        self.drives.iter().copied().zip(self.values.iter().copied())
    }

    /// Slope of a line through the origin fitted to the low-drive points.
    pub fn origin_slope(&self) -> Result<T> {
        expect_kind(ResponseKind::Amplitude, self.kind)?;
        let limit = T::lit(ORIGIN_SLOPE_LIMIT);
        let low: Vec<(T, T)> = self.points().filter(|&(a, _)| a < limit).collect();
        if low.len() < ORIGIN_SLOPE_MIN_POINTS {
            return Err(Error::InsufficientLowAmplitudeData {
                required: ORIGIN_SLOPE_MIN_POINTS,
                threshold: ORIGIN_SLOPE_LIMIT,
                found: low.len(),
            });
        }
        let sxy: T = low.iter().map(|&(a, y)| a * y).sum();
        let sxx: T = low.iter().map(|&(a, _)| a * a).sum();
        if sxx == T::zero() {
            return Err(Error::InsufficientLowAmplitudeData {
                required: ORIGIN_SLOPE_MIN_POINTS,
                threshold: ORIGIN_SLOPE_LIMIT,
                found: 0,
            });
        }
        Ok(sxy / sxx)
    }

    /// Rescales the values so the response has unit slope at the origin.
    pub fn normalize_unit_slope(&self) -> Result<Self> {
        let slope = self.origin_slope()?;
        if !(slope > T::zero()) {
            return Err(invalid("origin slope of the amplitude response is not positive"));
        }
        Ok(Self {
            kind: self.kind,
            drives: self.drives.clone(),
            values: self.values.iter().map(|&v| v / slope).collect(),
        })
    }
}

/// Polynomial response `f(A) = Σ c_k A^k`, `k = 1..=K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PolynomialTransfer<T> {
    kind: ResponseKind,
    coefficients: Vec<T>,
    residual_rms: T,
}

impl<T: Real> PolynomialTransfer<T> {
    /// `coefficients[k-1]` multiplies `A^k`.
    pub fn new(kind: ResponseKind, coefficients: Vec<T>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(invalid("polynomial transfer needs at least one coefficient"));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(invalid("polynomial coefficients must be finite"));
        }
        Ok(Self {
            kind,
            coefficients,
            residual_rms: T::zero(),
        })
    }

    pub fn identity() -> Self {
        Self {
            kind: ResponseKind::Amplitude,
            coefficients: vec![T::one()],
            residual_rms: T::zero(),
        }
    }

    pub fn with_residual_rms(mut self, rms: T) -> Self {
        self.residual_rms = rms;
        self
    }

    pub fn kind(&self) -> ResponseKind {
        self.kind
    }

    pub fn coefficients(&self) -> &[T] {
        &self.coefficients
    }

    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    pub fn residual_rms(&self) -> T {
        self.residual_rms
    }

    /// The bare polynomial, without clipping or symmetry.
    pub fn polynomial(&self, a: T) -> T {
        self.coefficients.iter().rev().fold(T::zero(), |acc, &c| (acc + c) * a)
    }

    pub fn derivative(&self, a: T) -> T {
        let mut acc = T::zero();
        for (k, &c) in self.coefficients.iter().enumerate().rev() {
            acc = acc * a + T::from_usize_lossy(k + 1) * c;
        }
        acc
    }

    /// Response to a signed drive: odd in `x` for amplitude, even for phase,
    /// with `|x|` clipped to 1.
    pub fn evaluate(&self, x: T) -> T {
        let mag = x.abs().min(T::one());
        let y = self.polynomial(mag);
        match self.kind {
            ResponseKind::Amplitude if x < T::zero() => -y,
            _ => y,
        }
    }

    /// Largest correctable output amplitude, `f(1)`.
    pub fn a_corr(&self) -> Result<T> {
        expect_kind(ResponseKind::Amplitude, self.kind)?;
        Ok(self.polynomial(T::one()))
    }

    /// Scans `f'` on a uniform grid over `[0, 1]` and reports the first drive
    /// where it is negative.
    pub fn first_negative_slope(&self) -> Option<(T, T)> {
        let last = MONOTONICITY_GRID - 1;
        (0..=last)
            .map(|i| T::from_usize_lossy(i) / T::from_usize_lossy(last))
            .map(|a| (a, self.derivative(a)))
            .find(|&(_, s)| s < T::zero())
    }

    pub fn check_monotone(&self) -> Result<()> {
        match self.first_negative_slope() {
            Some((a, s)) => Err(Error::NonMonotonicFit {
                drive: a.as_f64(),
                slope: s.as_f64(),
            }),
            None => Ok(()),
        }
    }

    /// Converts the coefficients to another precision.
    pub fn cast<U: Real>(&self) -> PolynomialTransfer<U> {
        PolynomialTransfer {
            kind: self.kind,
            coefficients: self.coefficients.iter().map(|c| U::lit(c.as_f64())).collect(),
            residual_rms: U::lit(self.residual_rms.as_f64()),
        }
    }

    /// Root-finding inverse of the amplitude response.
    pub fn invert(&self) -> Result<PredistortionMap<T>> {
        PredistortionMap::new(self.clone(), T::lit(INVERSION_TOLERANCE))
    }
}

fn fit_polynomial<T: Real>(kind: ResponseKind, pts: &[(T, T)], order: usize) -> Result<PolynomialTransfer<T>> {
    let rows: Vec<Vec<T>> = pts
        .iter()
        .map(|&(a, _)| {
            let mut p = a;
            (0..order)
                .map(|_| {
                    let v = p;
                    p = p * a;
                    v
                })
                .collect()
        })
        .collect();
    let rhs: Vec<T> = pts.iter().map(|&(_, y)| y).collect();
    let coefficients = least_squares(&rows, &rhs)?;
    let t = PolynomialTransfer::new(kind, coefficients)?;
    let ss: T = pts.iter().map(|&(a, y)| (t.polynomial(a) - y).powi(2)).sum();
    let rms = (ss / T::from_usize_lossy(pts.len())).sqrt();
    Ok(t.with_residual_rms(rms))
}

/// Unweighted least-squares amplitude fit with no constant term; fails if the
/// result is not increasing on `[0, 1]`.
pub fn fit_amplitude<T: Real>(data: &CalibrationDataset<T>, order: usize) -> Result<PolynomialTransfer<T>> {
    expect_kind(ResponseKind::Amplitude, data.kind)?;
    if order == 0 {
        return Err(invalid("polynomial order must be at least 1"));
    }
    if data.len() < order + 2 {
        return Err(invalid(format!(
            "order-{order} fit needs at least {} points, got {}",
            order + 2,
            data.len()
        )));
    }
    let pts: Vec<(T, T)> = data.points().collect();
    let t = fit_polynomial(ResponseKind::Amplitude, &pts, order)?;
    t.check_monotone()?;
    Ok(t)
}

/// Least-squares phase fit restricted to `range`, still through the origin.
pub fn fit_phase<T: Real>(data: &CalibrationDataset<T>, order: usize, range: (T, T)) -> Result<PolynomialTransfer<T>> {
    expect_kind(ResponseKind::Phase, data.kind)?;
    if order == 0 {
        return Err(invalid("polynomial order must be at least 1"));
    }
    if !data.drives.iter().any(|&a| a > T::lit(0.9)) {
        return Err(Error::InsufficientRangeCoverage("no points above A = 0.9".into()));
    }
    if !data.drives.iter().any(|&a| a < T::lit(0.3)) {
        return Err(Error::InsufficientRangeCoverage("no points below A = 0.3".into()));
    }
    let pts: Vec<(T, T)> = data.points().filter(|&(a, _)| a >= range.0 && a <= range.1).collect();
    if pts.len() < order + 1 {
        return Err(Error::InsufficientRangeCoverage(format!(
            "{} points inside [{}, {}] for an order-{order} fit",
            pts.len(),
            range.0,
            range.1
        )));
    }
    fit_polynomial(ResponseKind::Phase, &pts, order)
}

/// Inverse `g` of an increasing amplitude response, clamped to full drive
/// above `a_corr`.
#[derive(Debug, Clone)]
pub struct PredistortionMap<T> {
    source: PolynomialTransfer<T>,
    a_corr: T,
    tolerance: T,
    lookup: Option<Cubic<T>>,
}

impl<T: Real> PredistortionMap<T> {
    pub fn new(source: PolynomialTransfer<T>, tolerance: T) -> Result<Self> {
        let a_corr = source.a_corr()?;
        if let Some((a, _)) = source.first_negative_slope() {
            return Err(Error::NonMonotonicTransfer { drive: a.as_f64() });
        }
        if !(a_corr > T::zero()) {
            return Err(Error::NonMonotonicTransfer { drive: 1.0 });
        }
        Ok(Self {
            source,
            a_corr,
            tolerance,
            lookup: None,
        })
    }

    /// Adds a dense monotone lookup table, tabulated exactly at
    /// `(f(A_i), A_i)` on a uniform drive grid.
    pub fn with_lookup(mut self) -> Result<Self> {
        let last = MONOTONICITY_GRID - 1;
        let drives: Vec<T> = (0..=last)
            .map(|i| T::from_usize_lossy(i) / T::from_usize_lossy(last))
            .collect();
        let outputs: Vec<T> = drives.iter().map(|&a| self.source.polynomial(a)).collect();
        self.lookup = Some(Cubic::pchip(&outputs, &drives)?);
        Ok(self)
    }

    pub fn has_lookup(&self) -> bool {
        self.lookup.is_some()
    }

    pub fn source(&self) -> &PolynomialTransfer<T> {
        &self.source
    }

    pub fn a_corr(&self) -> T {
        self.a_corr
    }

    /// Drive magnitude producing output `u ≥ 0`.
    pub fn drive_for(&self, u: T) -> T {
        if !(u > T::zero()) {
            return T::zero();
        }
        if u >= self.a_corr {
            return T::one();
        }
        if let Some(table) = &self.lookup {
            return table.eval(u).max(T::zero()).min(T::one());
        }
        let f = |g: T| self.source.polynomial(g) - u;
        brent(f, T::zero(), T::one(), self.tolerance)
            .or_else(|_| bisect(f, T::zero(), T::one(), self.tolerance))
            .unwrap_or(T::one())
    }

    /// Odd extension of [`drive_for`](Self::drive_for) to signed samples.
    pub fn apply(&self, u: T) -> T {
        if u < T::zero() {
            -self.drive_for(-u)
        } else {
            self.drive_for(u)
        }
    }
}

/// Canonical synthetic modulator.
#[derive(Debug, Clone)]
pub struct ReferenceModel<T> {
    pub amplitude: PolynomialTransfer<T>,
    pub phase: PolynomialTransfer<T>,
    /// Compression parameter of the generating curve.
    pub beta: f64,
}

/// Compressive generating curve `√π·erf(βA)/(2β)`: unit slope at the origin,
/// slope `e^{-β²}` at full drive.
pub fn reference_curve(beta: f64, a: f64) -> f64 {
    statrs::function::erf::erf(beta * a) * std::f64::consts::PI.sqrt() / (2.0 * beta)
}

/// `β` such that the generating curve reaches [`REFERENCE_A_CORR`] at full drive.
pub fn reference_beta() -> f64 {
    bisect(|b: f64| reference_curve(b, 1.0) - REFERENCE_A_CORR, 0.5, 3.0, 1e-15)
        .expect("reference curve brackets its target")
}

/// Order-8 amplitude and order-5 phase fits of the synthetic modulator,
/// sampled densely on `[0, 1]`.
///
/// The fits always run in double precision; an order-8 monomial basis is
/// too ill-conditioned for `f32` least squares.
pub fn reference_model<T: Real>() -> ReferenceModel<T> {
    let beta = reference_beta();
    let last = MONOTONICITY_GRID - 1;
    let grid: Vec<f64> = (0..=last).map(|i| i as f64 / last as f64).collect();

    let amp = CalibrationDataset::sample(ResponseKind::Amplitude, &grid, |a| reference_curve(beta, a))
        .expect("valid reference samples");
    let amplitude = fit_amplitude(&amp, AMPLITUDE_ORDER).expect("reference amplitude fit");

    let phase = CalibrationDataset::sample(ResponseKind::Phase, &grid, |a| REFERENCE_PHASE_AT_FULL_DRIVE * a * a)
        .expect("valid reference samples");
    let phase = fit_phase(&phase, PHASE_ORDER, PHASE_FIT_RANGE).expect("reference phase fit");

    ReferenceModel {
        amplitude: amplitude.cast(),
        phase: phase.cast(),
        beta,
    }
}

/// Spread of a response curve across repeated calibrations.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct StabilityReport<T> {
    pub kind: ResponseKind,
    pub n_runs: usize,
    pub mean: T,
    pub sigma: T,
    /// Full-drive value of each run.
    pub per_run: Vec<T>,
    pub envelope: Vec<EnvelopePoint<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct EnvelopePoint<T> {
    pub drive: T,
    pub mean: T,
    pub lower: T,
    pub upper: T,
}

/// Number of drive points in the stability envelope.
pub const STABILITY_GRID: usize = 101;

fn mean_and_sd<T: Real>(v: &[T]) -> (T, T) {
    let n = T::from_usize_lossy(v.len());
    let mean = v.iter().copied().sum::<T>() / n;
    let ss: T = v.iter().map(|&x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - T::one())).sqrt())
}

/// Mean and sample standard deviation of `f(1)` over repeated runs, plus a
/// pointwise ±1σ envelope.
pub fn stability_stats<T: Real>(runs: &[PolynomialTransfer<T>], summary: ResponseKind) -> Result<StabilityReport<T>> {
    if runs.len() < 2 {
        return Err(invalid("stability statistics need at least two runs"));
    }
    for r in runs {
        expect_kind(summary, r.kind)?;
    }
    let per_run: Vec<T> = runs.iter().map(|r| r.polynomial(T::one())).collect();
    let (mean, sigma) = mean_and_sd(&per_run);
    let last = STABILITY_GRID - 1;
    let envelope = (0..=last)
        .map(|i| {
            let drive = T::from_usize_lossy(i) / T::from_usize_lossy(last);
            let vals: Vec<T> = runs.iter().map(|r| r.polynomial(drive)).collect();
            let (m, s) = mean_and_sd(&vals);
            EnvelopePoint {
                drive,
                mean: m,
                lower: m - s,
                upper: m + s,
            }
        })
        .collect();
    Ok(StabilityReport {
        kind: summary,
        n_runs: runs.len(),
        mean,
        sigma,
        per_run,
        envelope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn grid(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
    }

    fn amp(f: impl Fn(f64) -> f64) -> CalibrationDataset<f64> {
        CalibrationDataset::sample(ResponseKind::Amplitude, &grid(101), f).unwrap()
    }

    #[test]
    fn dataset_validation() {
        let k = ResponseKind::Amplitude;
        assert!(CalibrationDataset::new(k, [(0.2, 0.1), (0.1, 0.2)]).is_err());
        assert!(CalibrationDataset::new(k, [(0.1, -0.1)]).is_err());
        assert!(CalibrationDataset::new(k, [(1.2, 0.1)]).is_err());
        assert!(CalibrationDataset::new(ResponseKind::Phase, [(0.1, -0.1)]).is_ok());
    }

    #[test]
    fn normalization_rescales_linear_response() {
        let n = amp(|a| 2.0 * a).normalize_unit_slope().unwrap();
        for (a, y) in n.points() {
            assert_abs_diff_eq!(y, a, epsilon = 1e-15);
        }
    }

    #[test]
    fn normalization_needs_low_points() {
        let d = CalibrationDataset::new(
            ResponseKind::Amplitude,
            [(0.05, 0.05), (0.1, 0.1), (0.15, 0.15), (0.5, 0.4), (1.0, 0.6)],
        )
        .unwrap();
        assert!(matches!(
            d.normalize_unit_slope(),
            Err(Error::InsufficientLowAmplitudeData { found: 3, .. })
        ));
    }

    #[test]
    fn normalization_of_noisy_compressive_curve() {
        // 0.5·erf-curve: origin slope 0.5 by construction
        let beta = reference_beta();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let noise = Normal::new(0.0, 1e-4).unwrap();
        let drives = grid(201);
        let d = CalibrationDataset::sample(ResponseKind::Amplitude, &drives, |a| {
            (0.5 * reference_curve(beta, a) + noise.sample(&mut rng)).max(0.0)
        })
        .unwrap();
        let slope = d.normalize_unit_slope().unwrap().origin_slope().unwrap();
        assert_abs_diff_eq!(slope, 1.0, epsilon = 1e-12);
        // the through-origin fit of a compressive curve sits slightly below 0.5
        let raw = d.origin_slope().unwrap();
        assert!((raw - 0.5).abs() < 0.01, "{raw}");
    }

    #[test]
    fn fit_recovers_generating_polynomials() {
        let t = fit_amplitude(&amp(|a| a), AMPLITUDE_ORDER).unwrap();
        assert_abs_diff_eq!(t.coefficients()[0], 1.0, epsilon = 1e-9);
        for &c in &t.coefficients()[1..] {
            assert_abs_diff_eq!(c, 0.0, epsilon = 1e-9);
        }
        let t = fit_amplitude(&amp(|a| a - 0.2 * a.powi(3)), AMPLITUDE_ORDER).unwrap();
        let expect = [1.0, 0.0, -0.2, 0.0, 0.0, 0.0, 0.0, 0.0];
        for (&c, e) in t.coefficients().iter().zip(expect) {
            assert_abs_diff_eq!(c, e, epsilon = 1e-6);
        }
        assert_abs_diff_eq!(t.a_corr().unwrap(), 0.8, epsilon = 1e-9);
    }

    #[test]
    fn non_monotone_fit_is_reported() {
        let d = amp(|a| a - 0.6 * a.powi(3));
        assert!(matches!(fit_amplitude(&d, 3), Err(Error::NonMonotonicFit { .. })));
    }

    #[test]
    fn phase_fit_uses_restricted_range() {
        let d = CalibrationDataset::sample(ResponseKind::Phase, &grid(91), |a| 0.1 * a + 0.18 * a * a).unwrap();
        let t = fit_phase(&d, PHASE_ORDER, (0.1, 1.0)).unwrap();
        assert_abs_diff_eq!(t.coefficients()[0], 0.1, epsilon = 1e-6);
        assert_abs_diff_eq!(t.coefficients()[1], 0.18, epsilon = 1e-6);

        let d = CalibrationDataset::sample(ResponseKind::Phase, &grid(91), |a| 0.2776 * a).unwrap();
        let t = fit_phase(&d, PHASE_ORDER, (0.1, 1.0)).unwrap();
        assert_abs_diff_eq!(t.coefficients()[0], 0.2776, epsilon = 1e-6);

        let d = CalibrationDataset::sample(ResponseKind::Phase, &grid(91), |_| 0.0).unwrap();
        let t = fit_phase(&d, PHASE_ORDER, (0.1, 1.0)).unwrap();
        assert!(t.coefficients().iter().all(|&c| c == 0.0));

        // anything below 0.1 is ignored
        let d = CalibrationDataset::sample(ResponseKind::Phase, &grid(91), |a| if a < 0.1 { 5.0 } else { 0.3 * a })
            .unwrap();
        let t = fit_phase(&d, PHASE_ORDER, (0.1, 1.0)).unwrap();
        assert_abs_diff_eq!(t.evaluate(1.0), 0.3, epsilon = 1e-9);
    }

    #[test]
    fn phase_fit_coverage() {
        let upper: Vec<f64> = (0..20).map(|i| 0.4 + 0.03 * i as f64).collect();
        let d = CalibrationDataset::sample(ResponseKind::Phase, &upper, |a| a).unwrap();
        assert!(matches!(
            fit_phase(&d, 5, (0.1, 1.0)),
            Err(Error::InsufficientRangeCoverage(_))
        ));
        let lower: Vec<f64> = (0..20).map(|i| 0.1 + 0.03 * i as f64).collect();
        let d = CalibrationDataset::sample(ResponseKind::Phase, &lower, |a| a).unwrap();
        assert!(matches!(
            fit_phase(&d, 5, (0.1, 1.0)),
            Err(Error::InsufficientRangeCoverage(_))
        ));
    }

    #[test]
    fn kind_is_checked() {
        let d = CalibrationDataset::sample(ResponseKind::Phase, &grid(20), |a| a).unwrap();
        assert!(matches!(fit_amplitude(&d, 3), Err(Error::KindMismatch { .. })));
        let p = PolynomialTransfer::new(ResponseKind::Phase, vec![0.3]).unwrap();
        assert!(p.a_corr().is_err());
        assert!(p.invert().is_err());
    }

    #[test]
    fn evaluation_clips_and_is_symmetric() {
        let m = reference_model::<f64>();
        assert_eq!(m.amplitude.evaluate(0.0), 0.0);
        assert_eq!(m.amplitude.evaluate(1.4), m.amplitude.evaluate(1.0));
        assert_abs_diff_eq!(m.amplitude.evaluate(-1.0), -REFERENCE_A_CORR, epsilon = 1e-5);
        assert_eq!(m.phase.evaluate(-0.7), m.phase.evaluate(0.7));
    }

    #[test]
    fn reference_model_anchors() {
        let m = reference_model::<f64>();
        // oracle: the generating curve, solved independently
        assert_abs_diff_eq!(m.beta, 1.517_153_828_241_757, epsilon = 1e-10);
        assert_abs_diff_eq!(m.amplitude.a_corr().unwrap(), REFERENCE_A_CORR, epsilon = 1e-5);
        assert_abs_diff_eq!(m.phase.evaluate(1.0), REFERENCE_PHASE_AT_FULL_DRIVE, epsilon = 1e-9);
        assert_abs_diff_eq!(m.amplitude.coefficients()[0], 1.0, epsilon = 1e-3);
        for a in grid(1001) {
            assert!((m.amplitude.polynomial(a) - reference_curve(m.beta, a)).abs() < 1e-4);
        }
        assert!(m.amplitude.check_monotone().is_ok());
        // the through-origin estimator sees the cubic compression below A = 0.2,
        // so it reads slightly under the analytic unit slope
        let d =
            CalibrationDataset::sample(ResponseKind::Amplitude, &grid(1001), |a| m.amplitude.polynomial(a)).unwrap();
        assert_abs_diff_eq!(d.origin_slope().unwrap(), 0.982_031_828_062_179, epsilon = 1e-5);
    }

    #[test]
    fn inversion_examples() {
        let id = PolynomialTransfer::<f64>::identity().invert().unwrap();
        assert_abs_diff_eq!(id.apply(0.37), 0.37, epsilon = 1e-9);

        let m = reference_model::<f64>();
        let g = m.amplitude.invert().unwrap();
        // oracle: root of the generating curve at 0.2, solved externally
        let direct = bisect(|x: f64| reference_curve(m.beta, x) - 0.2, 0.0, 1.0, 1e-15).unwrap();
        assert_abs_diff_eq!(g.apply(0.2), direct, epsilon = 1e-5);
        assert_abs_diff_eq!(g.apply(0.2), 0.206_568_126_752_223, epsilon = 1e-5);
        assert_eq!(g.apply(0.7), 1.0);
        assert_eq!(g.apply(g.a_corr()), 1.0);
        assert_eq!(g.apply(0.0), 0.0);
        assert_eq!(g.apply(-0.3), -g.apply(0.3));
    }

    #[test]
    fn round_trip_and_lookup_agree() {
        let m = reference_model::<f64>();
        let g = m.amplitude.invert().unwrap();
        let table = g.clone().with_lookup().unwrap();
        let a = g.a_corr();
        let mut worst: f64 = 0.0;
        let mut worst_table: f64 = 0.0;
        for i in 0..=20_000 {
            let u = a * i as f64 / 20_000.0;
            worst = worst.max((m.amplitude.evaluate(g.apply(u)) - u).abs());
            worst_table = worst_table.max((table.apply(u) - g.apply(u)).abs());
        }
        assert!(worst <= 1e-6, "{worst}");
        assert!(worst_table <= 1e-6, "{worst_table}");
    }

    #[test]
    fn stability_statistics() {
        let m = reference_model::<f64>();
        let same = vec![m.amplitude.clone(); 5];
        let r = stability_stats(&same, ResponseKind::Amplitude).unwrap();
        assert_eq!(r.sigma, 0.0);
        assert_eq!(r.envelope.len(), STABILITY_GRID);

        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let spread = Normal::new(1.0, 0.0091 / REFERENCE_A_CORR).unwrap();
        let runs: Vec<_> = (0..34)
            .map(|_| {
                let s = spread.sample(&mut rng);
                let c = m.amplitude.coefficients().iter().map(|&c| c * s).collect();
                PolynomialTransfer::new(ResponseKind::Amplitude, c).unwrap()
            })
            .collect();
        let r = stability_stats(&runs, ResponseKind::Amplitude).unwrap();
        let se = 0.0091 / 34f64.sqrt();
        assert!((r.mean - 0.5655).abs() < 3.0 * se);
        // standard error of a sample sd is about σ/√(2(n−1))
        assert!((r.sigma - 0.0091).abs() < 3.0 * 0.0091 / 66f64.sqrt());
        assert!(r.envelope.iter().all(|p| p.lower <= p.upper));

        let spread = Normal::<f64>::new(0.2776, 0.0009).unwrap();
        let runs: Vec<_> = (0..6)
            .map(|_| PolynomialTransfer::new(ResponseKind::Phase, vec![0.0, spread.sample(&mut rng)]).unwrap())
            .collect();
        let r = stability_stats(&runs, ResponseKind::Phase).unwrap();
        assert!((r.mean - 0.2776).abs() < 3.0 * 0.0009 / 6f64.sqrt());
        assert!(stability_stats(&runs, ResponseKind::Amplitude).is_err());
        assert!(stability_stats(&runs[..1], ResponseKind::Phase).is_err());
    }

    #[test]
    fn single_precision_instantiation() {
        let m = reference_model::<f32>();
        let g = m.amplitude.invert().unwrap();
        let u = 0.3f32;
        assert!((m.amplitude.evaluate(g.apply(u)) - u).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn odd_and_even_symmetry(x in -2.0f64..2.0) {
            let m = reference_model::<f64>();
            prop_assert_eq!(m.amplitude.evaluate(-x), -m.amplitude.evaluate(x));
            prop_assert_eq!(m.phase.evaluate(-x), m.phase.evaluate(x));
        }

        #[test]
        fn inverse_is_monotone(u in 0.0f64..0.6, du in 1e-6f64..0.05) {
            let g = reference_model::<f64>().amplitude.invert().unwrap();
            prop_assert!(g.apply(u + du) >= g.apply(u));
        }

        #[test]
        fn fit_idempotence(c in proptest::collection::vec(-0.05f64..0.05, 7)) {
            let mut coeffs = vec![1.0f64];
            coeffs.extend(c);
            let p = PolynomialTransfer::new(ResponseKind::Phase, coeffs.clone()).unwrap();
            let d = CalibrationDataset::sample(ResponseKind::Phase, &grid(201), |a| p.polynomial(a)).unwrap();
            let t = fit_phase(&d, 8, (0.0, 1.0)).unwrap();
            for (a, b) in t.coefficients().iter().zip(&coeffs) {
                prop_assert!((a - b).abs() < 1e-6);
            }
        }
    }
}
