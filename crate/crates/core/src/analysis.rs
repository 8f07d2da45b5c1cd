//! Bell-state fidelity from population and parity-fringe records, count-level
//! pooling, gate-rate mapping and the two-parameter axis fit.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::linalg::{inverse2, sym2_eigenvalues};
use crate::numeric::simplex::nelder_mead;
use crate::scalar::Real;

/// Probability guard for the binomial likelihood.
pub const P_CLAMP: f64 = 1e-9;
/// Central-difference step for the likelihood Hessian.
pub const HESSIAN_STEP: f64 = 1e-5;
/// Grid onto which parity phases are rounded before merging, rad.
pub const PHASE_GRID: f64 = 0.01;
pub const ANCHOR_DRIVE: f64 = 0.4;
pub const BUDGETS: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// Drive amplitude and DPD flag of one experimental setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Setting {
    pub drive: f64,
    pub dpd: bool,
}

impl Setting {
    pub fn new(drive: f64, dpd: bool) -> Self {
        Self { drive, dpd }
    }

    pub fn matches(&self, other: &Setting) -> bool {
        self.dpd == other.dpd && (self.drive - other.drive).abs() <= 1e-9
    }
}

/// Value with a one-sigma uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Measured<T> {
    pub value: T,
    pub sigma: T,
}

impl<T: Real> Measured<T> {
    pub fn new(value: T, sigma: T) -> Self {
        Self { value, sigma }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationRecord {
    pub even_count: u64,
    pub total: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub setting: Option<Setting>,
}

impl PopulationRecord {
    pub fn new(even_count: u64, total: u64) -> Result<Self> {
        if even_count > total {
            return Err(invalid(format!("even count {even_count} exceeds total {total}")));
        }
        Ok(Self {
            even_count,
            total,
            setting: None,
        })
    }

    /// Counts recovered from a reported fraction, `k = round(F·N)`.
    pub fn from_fraction(fraction: f64, total: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(invalid("population fraction must lie in [0, 1]"));
        }
        Self::new((fraction * total as f64).round() as u64, total)
    }

    pub fn at(mut self, setting: Setting) -> Self {
        self.setting = Some(setting);
        self
    }
}

/// `F_pop = k/N` with binomial `σ`.
pub fn population_fidelity<T: Real>(rec: &PopulationRecord) -> Result<Measured<T>> {
    if rec.total == 0 {
        return Err(invalid("population record has no shots"));
    }
    if rec.even_count > rec.total {
        return Err(invalid("even count exceeds total"));
    }
    let n = T::lit(rec.total as f64);
    let f = T::lit(rec.even_count as f64) / n;
    Ok(Measured::new(f, (f * (T::one() - f) / n).sqrt()))
}

fn common_setting<'a, I: Iterator<Item = Option<&'a Setting>>>(mut settings: I) -> Result<Option<Setting>> {
    let first = match settings.next() {
        Some(s) => s.copied(),
        None => return Err(invalid("nothing to pool")),
    };
    for s in settings {
        match (first, s) {
            (Some(a), Some(b)) if !a.matches(b) => {
                return Err(invalid("records come from different settings"));
            }
            (Some(_), None) | (None, Some(_)) => {
                return Err(invalid("records come from different settings"));
            }
            _ => {}
        }
    }
    Ok(first)
}

/// Sums counts across records at one setting.
pub fn pool_populations(records: &[PopulationRecord]) -> Result<PopulationRecord> {
    let setting = common_setting(records.iter().map(|r| r.setting.as_ref()))?;
    let mut out = PopulationRecord::new(
        records.iter().map(|r| r.even_count).sum(),
        records.iter().map(|r| r.total).sum(),
    )?;
    out.setting = setting;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParityPoint {
    /// Analysis phase, rad.
    pub phase: f64,
    pub even_count: u64,
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParityScan {
    pub points: Vec<ParityPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub setting: Option<Setting>,
}

impl ParityScan {
    pub fn new(points: Vec<ParityPoint>) -> Result<Self> {
        let scan = Self { points, setting: None };
        scan.validate()?;
        Ok(scan)
    }

    pub fn at(mut self, setting: Setting) -> Self {
        self.setting = Some(setting);
        self
    }

    pub fn validate(&self) -> Result<()> {
        for p in &self.points {
            if p.even_count > p.total {
                return Err(invalid(format!("even count exceeds total at phase {}", p.phase)));
            }
            if !(0.0..2.0 * PI).contains(&p.phase) {
                return Err(invalid(format!("phase {} outside [0, 2π)", p.phase)));
            }
        }
        Ok(())
    }

    pub fn total_shots(&self) -> u64 {
        self.points.iter().map(|p| p.total).sum()
    }
}

/// Sums counts at matching phases after rounding to a 0.01 rad grid
/// (ties to even).
pub fn merge_parity(scans: &[ParityScan]) -> Result<ParityScan> {
    let setting = common_setting(scans.iter().map(|s| s.setting.as_ref()))?;
    let mut grid: BTreeMap<i64, (u64, u64)> = BTreeMap::new();
    for scan in scans {
        scan.validate()?;
        for p in &scan.points {
            let key = (p.phase / PHASE_GRID).round_half_even() as i64;
            let e = grid.entry(key).or_insert((0, 0));
            e.0 += p.even_count;
            e.1 += p.total;
        }
    }
    let points = grid
        .into_iter()
        .map(|(key, (even_count, total))| ParityPoint {
            phase: key as f64 * PHASE_GRID,
            even_count,
            total,
        })
        .collect();
    Ok(ParityScan { points, setting })
}

/// Maximum-likelihood fringe `Π(φ) = 𝒜 cos(2φ + φ₀)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ParityFit<T> {
    pub contrast: T,
    pub phase: T,
    pub sigma_contrast: T,
    pub sigma_phase: T,
    /// Deviance from the saturated model at the optimum.
    pub deviance: T,
    pub iterations: usize,
}

impl<T: Real> ParityFit<T> {
    /// `F_par = |𝒜|`.
    pub fn fidelity(&self) -> Measured<T> {
        Measured::new(self.contrast.abs(), self.sigma_contrast)
    }
}

fn check_coverage(scan: &ParityScan) -> Result<()> {
    if scan.points.iter().any(|p| p.total == 0) {
        return Err(Error::DegenerateScan("a phase point has no shots".into()));
    }
    let mut phases: Vec<f64> = scan.points.iter().map(|p| p.phase).collect();
    phases.sort_by(f64::total_cmp);
    phases.dedup();
    if phases.len() < 4 {
        return Err(Error::DegenerateScan(format!(
            "{} distinct phases, need 4",
            phases.len()
        )));
    }
    // the fringe period in φ is π
    let span = phases[phases.len() - 1] - phases[0];
    if span < PI / 2.0 {
        return Err(Error::DegenerateScan(format!("phases span {span:.3} rad, need π/2")));
    }
    Ok(())
}

/// `−ln 𝓛` minus its saturated value, so it is zero for a perfect fit.
fn deviance<T: Real>(data: &[(T, T, T)], contrast: T, phase: T) -> T {
    let lo = T::lit(P_CLAMP);
    let hi = T::one() - lo;
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    data.iter()
        .map(|&(phi, k, n)| {
            let p = (half * (T::one() + contrast * (two * phi + phase).cos()))
                .max(lo)
                .min(hi);
            let q = k / n;
            let mut d = T::zero();
            if k > T::zero() {
                d = d + k * (q / p).ln();
            }
            if n > k {
                d = d + (n - k) * ((T::one() - q) / (T::one() - p)).ln();
            }
            d
        })
        .sum()
}

/// Binomial MLE of the parity fringe, started from the frequency-2 Fourier
/// component, with `σ` from the inverse finite-difference Hessian.
pub fn parity_mle<T: Real>(scan: &ParityScan) -> Result<ParityFit<T>> {
    scan.validate()?;
    check_coverage(scan)?;
    let data: Vec<(T, T, T)> = scan
        .points
        .iter()
        .map(|p| (T::lit(p.phase), T::lit(p.even_count as f64), T::lit(p.total as f64)))
        .collect();
    let two = T::lit(2.0);

    let (mut re, mut im) = (T::zero(), T::zero());
    for &(phi, k, n) in &data {
        let parity = two * k / n - T::one();
        re = re + parity * (two * phi).cos();
        im = im - parity * (two * phi).sin();
    }
    let m = T::from_usize_lossy(data.len());
    let a0 = (two * (re * re + im * im).sqrt() / m).min(T::lit(0.99));
    let phi0 = im.atan2(re);

    let scale = T::lit(scan.total_shots() as f64);
    let objective = |x: &[T]| {
        if x[0].abs() >= T::one() {
            T::infinity()
        } else {
            deviance(&data, x[0], x[1]) / scale
        }
    };
    let best = nelder_mead(
        objective,
        &[a0, phi0],
        &[T::lit(0.05), T::lit(0.2)],
        T::lit(1e-10),
        T::lit(1e-16),
        20_000,
    );
    if !best.converged {
        return Err(Error::NoConvergence(format!(
            "parity MLE after {} iterations",
            best.iterations
        )));
    }
    let (mut a, mut ph) = (best.x[0], best.x[1]);
    if a < T::zero() {
        a = -a;
        ph = ph + T::PI();
    }
    let tau = two * T::PI();
    ph = ph - tau * ((ph + T::PI()) / tau).floor();

    let e = T::lit(HESSIAN_STEP);
    let f = |da: T, dp: T| deviance(&data, a + da, ph + dp);
    let f0 = f(T::zero(), T::zero());
    let haa = (f(e, T::zero()) - two * f0 + f(-e, T::zero())) / (e * e);
    let hpp = (f(T::zero(), e) - two * f0 + f(T::zero(), -e)) / (e * e);
    let hap = (f(e, e) - f(e, -e) - f(-e, e) + f(-e, -e)) / (T::lit(4.0) * e * e);
    let h = [[haa, hap], [hap, hpp]];
    let (lo, _) = sym2_eigenvalues(h);
    let singular = || Error::NonPositiveDefiniteHessian {
        contrast: a.as_f64(),
        phase: ph.as_f64(),
    };
    if !(lo > T::zero()) {
        return Err(singular());
    }
    let inv = inverse2(h).ok_or_else(singular)?;
    Ok(ParityFit {
        contrast: a,
        phase: ph,
        sigma_contrast: inv[0][0].sqrt(),
        sigma_phase: inv[1][1].sqrt(),
        deviance: f0,
        iterations: best.iterations,
    })
}

/// `𝓕 = (F_pop + F_par)/2`, `σ = ½√(σ_pop² + σ_par²)`.
pub fn bell_fidelity<T: Real>(pop: Measured<T>, par: Measured<T>) -> Result<Measured<T>> {
    let unit = |x: T| x >= T::zero() && x <= T::one();
    if !unit(pop.value) || !unit(par.value) {
        return Err(invalid("fidelity contributions must lie in [0, 1]"));
    }
    let half = T::lit(0.5);
    Ok(Measured::new(
        half * (pop.value + par.value),
        half * (pop.sigma * pop.sigma + par.sigma * par.sigma).sqrt(),
    ))
}

/// Simulated gate-tone power at one setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PowerPoint<T> {
    pub setting: Setting,
    /// Absolute `n = 1` power, dB.
    pub p1_db: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct RatePoint<T> {
    pub setting: Setting,
    pub r_rel: T,
}

/// `r_rel = 10^{(P₁ − P₁^anchor)/20}`.
pub fn gate_rate_map<T: Real>(sweep: &[PowerPoint<T>], anchor: Setting) -> Result<Vec<RatePoint<T>>> {
    let base = sweep
        .iter()
        .find(|p| p.setting.matches(&anchor))
        .ok_or_else(|| {
            invalid(format!(
                "anchor setting A = {}, dpd = {} not in sweep",
                anchor.drive, anchor.dpd
            ))
        })?
        .p1_db;
    Ok(sweep
        .iter()
        .map(|p| RatePoint {
            setting: p.setting,
            r_rel: T::lit(10.0).powf((p.p1_db - base) / T::lit(20.0)),
        })
        .collect())
}

pub fn default_anchor() -> Setting {
    Setting::new(ANCHOR_DRIVE, false)
}

/// `σ_ξ/ξ = (ln 10/20)·σ_dB`.
pub fn rate_uncertainty<T: Real>(sigma_db: T) -> Result<T> {
    if !(sigma_db >= T::zero()) {
        return Err(invalid("power spread must be non-negative"));
    }
    Ok(T::LN_10() / T::lit(20.0) * sigma_db)
}

/// Calibration and power-fluctuation rate errors in quadrature.
pub fn combined_rate_sigma<T: Real>(xi0: T, sigma_cal: T, sigma_db: T) -> Result<T> {
    let frac = rate_uncertainty(sigma_db)? * xi0;
    Ok((sigma_cal * sigma_cal + frac * frac).sqrt())
}

/// One gate measurement joined with the photodiode prediction at its setting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct AxisPoint<T> {
    pub r_rel: T,
    /// Measured gate rate, kHz.
    pub xi0: T,
    pub sigma_xi0: T,
    pub fidelity: T,
    pub sigma_fidelity: T,
    /// Photodiode-derived fidelity.
    pub f_pd: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct AxisFit<T> {
    pub alpha_khz: T,
    pub delta: T,
    pub sigma_alpha: T,
    pub sigma_delta: T,
    /// Weighted horizontal then vertical residuals.
    #[serde(default, skip_serializing)]
    pub residuals: Vec<T>,
}

impl<T: Real> AxisFit<T> {
    pub fn chi2(&self) -> T {
        self.residuals.iter().map(|&r| r * r).sum()
    }
}

/// Minimizes `Σ(ξᵢ − α rᵢ)²/σ_hᵢ² + Σ(𝓕ᵢ − 𝓕_PDᵢ − δ)²/σ_vᵢ²`.
pub fn fit_axes<T: Real>(points: &[AxisPoint<T>]) -> Result<AxisFit<T>> {
    if points.len() < 2 {
        return Err(Error::UnderdeterminedFit(format!(
            "{} gate points, need 2",
            points.len()
        )));
    }
    for p in points {
        if !(p.sigma_xi0 > T::zero() && p.sigma_fidelity > T::zero()) {
            return Err(invalid("axis-fit uncertainties must be positive"));
        }
        if !(p.r_rel > T::zero()) {
            return Err(invalid("relative rates must be positive"));
        }
    }
    let r0 = points[0].r_rel;
    if points.iter().all(|p| (p.r_rel - r0).abs() <= T::epsilon() * r0) {
        return Err(Error::UnderdeterminedFit("all gate points share one rate".into()));
    }
    // the normal matrix is diagonal: α and δ enter separate blocks
    let (mut saa, mut sa) = (T::zero(), T::zero());
    let (mut sdd, mut sd) = (T::zero(), T::zero());
    for p in points {
        let wh = (p.sigma_xi0 * p.sigma_xi0).recip();
        let wv = (p.sigma_fidelity * p.sigma_fidelity).recip();
        saa = saa + wh * p.r_rel * p.r_rel;
        sa = sa + wh * p.r_rel * p.xi0;
        sdd = sdd + wv;
        sd = sd + wv * (p.fidelity - p.f_pd);
    }
    let alpha = sa / saa;
    let delta = sd / sdd;
    let residuals = points
        .iter()
        .map(|p| (p.xi0 - alpha * p.r_rel) / p.sigma_xi0)
        .chain(points.iter().map(|p| (p.fidelity - p.f_pd - delta) / p.sigma_fidelity))
        .collect();
    Ok(AxisFit {
        alpha_khz: alpha,
        delta,
        sigma_alpha: saa.sqrt().recip(),
        sigma_delta: sdd.sqrt().recip(),
        residuals,
    })
}

/// `η̄` where the infidelity first rises through `budget`, interpolated on
/// log–log axes.
pub fn threshold_efficiency<T: Real>(curve: &[(T, T)], budget: T) -> Result<T> {
    if !(budget > T::zero()) {
        return Err(invalid("budget must be positive"));
    }
    let mut pts: Vec<(T, T)> = curve.to_vec();
    if pts.iter().any(|&(e, _)| !(e > T::zero())) {
        return Err(invalid("efficiencies must be positive"));
    }
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
    let tiny = T::min_positive_value();
    for w in pts.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if y0 <= budget && y1 > budget {
            if y0 == budget {
                return Ok(x0);
            }
            let (ly0, ly1) = (y0.max(tiny).ln(), y1.ln());
            let s = (budget.ln() - ly0) / (ly1 - ly0);
            return Ok((x0.ln() + s * (x1.ln() - x0.ln())).exp());
        }
    }
    Err(Error::BudgetNotCrossed {
        budget: budget.as_f64(),
    })
}

pub fn threshold_efficiencies<T: Real>(curve: &[(T, T)], budgets: &[T]) -> Result<Vec<T>> {
    budgets.iter().map(|&b| threshold_efficiency(curve, b)).collect()
}

/// Binomial parity scan at `n_phases` uniform phases on `[0, 2π)`.
pub fn synthetic_parity_scan<R: Rng + ?Sized>(
    contrast: f64,
    phase: f64,
    n_phases: usize,
    shots: u64,
    rng: &mut R,
) -> Result<ParityScan> {
    let points = (0..n_phases)
        .map(|i| {
            let phi = 2.0 * PI * i as f64 / n_phases as f64;
            let p = 0.5 * (1.0 + contrast * (2.0 * phi + phase).cos());
            let k = Binomial::new(shots, p.clamp(0.0, 1.0))
                .map_err(|e| invalid(e.to_string()))?
                .sample(rng);
            Ok(ParityPoint {
                phase: phi,
                even_count: k,
                total: shots,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ParityScan::new(points)
}

/// Parity scan with counts at their expectation, rounded to whole shots.
pub fn expected_parity_scan(contrast: f64, phase: f64, n_phases: usize, shots: u64) -> Result<ParityScan> {
    let points = (0..n_phases)
        .map(|i| {
            let phi = 2.0 * PI * i as f64 / n_phases as f64;
            let p = 0.5 * (1.0 + contrast * (2.0 * phi + phase).cos());
            ParityPoint {
                phase: phi,
                even_count: (p * shots as f64).round() as u64,
                total: shots,
            }
        })
        .collect();
    ParityScan::new(points)
}

pub fn synthetic_population<R: Rng + ?Sized>(fidelity: f64, shots: u64, rng: &mut R) -> Result<PopulationRecord> {
    let k = Binomial::new(shots, fidelity)
        .map_err(|e| invalid(e.to_string()))?
        .sample(rng);
    PopulationRecord::new(k, shots)
}

/// Axis-fit data from `ξ = α r`, `𝓕 = 𝓕_PD + δ` with Gaussian noise of the
/// given widths.
pub fn synthetic_axis_points<R: Rng + ?Sized>(
    alpha: f64,
    delta: f64,
    rates: &[(f64, f64)],
    sigma_xi0: f64,
    sigma_fidelity: f64,
    rng: &mut R,
) -> Result<Vec<AxisPoint<f64>>> {
    let nh = Normal::new(0.0, sigma_xi0).map_err(|e| invalid(e.to_string()))?;
    let nv = Normal::new(0.0, sigma_fidelity).map_err(|e| invalid(e.to_string()))?;
    Ok(rates
        .iter()
        .map(|&(r_rel, f_pd)| AxisPoint {
            r_rel,
            xi0: alpha * r_rel + nh.sample(rng),
            sigma_xi0,
            fidelity: f_pd + delta + nv.sample(rng),
            sigma_fidelity,
            f_pd,
        })
        .collect())
}
