//! End-to-end simulation: synthesis, predistortion, modulator, heterodyne
//! spectrum, tone extraction and fidelity estimate, swept over drive amplitude.

use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{threshold_efficiency, BUDGETS};
use crate::error::{invalid, Error, Result};
use crate::fidelity::{
    estimate_from_sidebands, im_threshold_table, EstimateOptions, FidelityEstimate, ThresholdRow, DEFAULT_ETA_LD,
    DEFAULT_NBAR, THRESHOLD_TARGETS,
};
use crate::forward::{
    default_drive_grid, eta_bar, eta_bar_grid, forward, EfficiencyCurve, EfficiencyRow, DEFAULT_ETA_REF,
    EFFICIENCY_GRID,
};
use crate::io::write_csv_file;
use crate::spectral::{
    average_db, average_ratios, extract_tones, heterodyne_mix, periodogram, BeatNoise, Sideband, ToneReport,
    DEFAULT_F_DET,
};
use crate::transfer::{reference_model, PolynomialTransfer, PredistortionMap};
use crate::waveform::{predistort, synth_cardioid, GateSpec, IqWaveform, DEFAULT_NU, DEFAULT_XI0};

/// Sample rate of simulated records: above the beat-note Nyquist limit for
/// the default detection offset, and 40 gate periods give 500 Hz bins.
pub const DEFAULT_SIM_SAMPLE_RATE: f64 = 100e6;
pub const DEFAULT_SIM_PERIODS: usize = 40;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulationConfig {
    pub nu: f64,
    pub xi0: f64,
    pub f_det: f64,
    pub sample_rate: f64,
    pub n_periods: usize,
    pub eta_ref: f64,
    pub nbar: f64,
    pub eta_ld: f64,
    /// Include the phase response in the modulator model.
    pub with_phase: bool,
    /// Beat-record noise, per-sample standard deviation; zero disables it.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            nu: DEFAULT_NU,
            xi0: DEFAULT_XI0,
            f_det: DEFAULT_F_DET,
            sample_rate: DEFAULT_SIM_SAMPLE_RATE,
            n_periods: DEFAULT_SIM_PERIODS,
            eta_ref: DEFAULT_ETA_REF,
            nbar: DEFAULT_NBAR,
            eta_ld: DEFAULT_ETA_LD,
            with_phase: true,
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("nu", self.nu),
            ("xi0", self.xi0),
            ("f_det", self.f_det),
            ("sample_rate", self.sample_rate),
            ("eta_ref", self.eta_ref),
            ("eta_ld", self.eta_ld),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive")));
            }
        }
        if self.nu <= self.xi0 {
            return Err(invalid("nu must exceed xi0"));
        }
        if self.n_periods == 0 {
            return Err(invalid("n_periods must be at least 1"));
        }
        if !(self.nbar >= 0.0) || !(self.noise_sigma >= 0.0) {
            return Err(invalid("nbar and noise_sigma must be non-negative"));
        }
        Ok(())
    }

    pub fn gate(&self, drive: f64) -> GateSpec {
        GateSpec::cardioid(self.nu, self.xi0, drive)
    }

    pub fn estimate_options(&self) -> EstimateOptions<f64> {
        EstimateOptions {
            xi0: self.xi0,
            eta_ld: self.eta_ld,
            ..EstimateOptions::default()
        }
    }
}

/// Modulator model plus its predistortion map.
#[derive(Debug, Clone)]
pub struct Modulator {
    pub amplitude: PolynomialTransfer<f64>,
    pub phase: Option<PolynomialTransfer<f64>>,
    pub map: PredistortionMap<f64>,
}

impl Modulator {
    pub fn new(amplitude: PolynomialTransfer<f64>, phase: Option<PolynomialTransfer<f64>>) -> Result<Self> {
        let map = amplitude.invert()?.with_lookup()?;
        Ok(Self { amplitude, phase, map })
    }

    pub fn reference() -> Result<Self> {
        let m = reference_model::<f64>();
        Self::new(m.amplitude, Some(m.phase))
    }

    pub fn a_corr(&self) -> f64 {
        self.map.a_corr()
    }
}

/// Everything measured at one `(A, dpd)` setting.
#[derive(Debug, Clone, Serialize)]
pub struct SimulationPoint {
    pub drive: f64,
    pub dpd: bool,
    pub blue: ToneReport<f64>,
    pub red: ToneReport<f64>,
    pub r10_db: f64,
    pub r23_db: f64,
    /// Absolute gate-tone powers averaged over both sidebands, dB.
    pub p1_db: f64,
    pub p2_db: f64,
    pub eta_bar: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity: Option<FidelityEstimate<f64>>,
}

/// Beat-note tone reports for one drive waveform.
pub fn spectrum_reports(
    drive: &IqWaveform<f64>,
    modulator: &Modulator,
    cfg: &SimulationConfig,
    noise_seed: u64,
) -> Result<(ToneReport<f64>, ToneReport<f64>)> {
    let spec = drive
        .spec
        .clone()
        .ok_or_else(|| invalid("waveform carries no gate definition"))?;
    let opt = forward(
        drive,
        &modulator.amplitude,
        if cfg.with_phase { modulator.phase.as_ref() } else { None },
    )?;
    let noise = (cfg.noise_sigma > 0.0).then_some(BeatNoise {
        sigma: cfg.noise_sigma,
        seed: noise_seed,
    });
    let beat = heterodyne_mix(&opt, cfg.f_det, 1.0, noise)?;
    let psd = periodogram(&beat)?;
    Ok((
        extract_tones(&psd, &spec, cfg.f_det, Sideband::Blue)?,
        extract_tones(&psd, &spec, cfg.f_det, Sideband::Red)?,
    ))
}

/// Drive waveform at amplitude `a`: normalized, then predistorted if `dpd`.
pub fn drive_waveform(a: f64, dpd: bool, modulator: &Modulator, cfg: &SimulationConfig) -> Result<IqWaveform<f64>> {
    let w = synth_cardioid(&cfg.gate(a), cfg.sample_rate, cfg.n_periods)?;
    if dpd {
        predistort(&w, &modulator.map)
    } else {
        Ok(w)
    }
}

pub fn simulate_point(
    a: f64,
    dpd: bool,
    modulator: &Modulator,
    cfg: &SimulationConfig,
    noise_seed: u64,
) -> Result<SimulationPoint> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(invalid(format!("drive amplitude {a} outside (0, 1]")));
    }
    let w = drive_waveform(a, dpd, modulator, cfg)?;
    let (blue, red) = spectrum_reports(&w, modulator, cfg, noise_seed)?;
    let (r10_db, r23_db) = average_ratios(&blue, &red)?;
    let p1_db = average_db(blue.absolute_db(1)?, red.absolute_db(1)?);
    let p2_db = average_db(blue.absolute_db(2)?, red.absolute_db(2)?);
    let eta = eta_bar(&w, &modulator.amplitude, cfg.eta_ref)?;
    let fidelity = match estimate_from_sidebands(&blue, &red, cfg.nbar, &cfg.estimate_options()) {
        Ok(f) => Some(f),
        Err(Error::InvalidGateTones { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(SimulationPoint {
        drive: a,
        dpd,
        blue,
        red,
        r10_db,
        r23_db,
        p1_db,
        p2_db,
        eta_bar: eta,
        fidelity,
    })
}

/// `spectral_sweep.csv` row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralRow {
    pub a: f64,
    pub dpd: bool,
    pub r10_db: f64,
    pub r23_db: f64,
    /// Gate-tone power change relative to the no-DPD point at the same drive.
    pub dp1_db: f64,
    pub dp2_db: f64,
    pub eta_bar: f64,
}

/// `fidelity_vs_eta.csv` row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityRow {
    pub a: f64,
    pub dpd: bool,
    pub eta_bar: f64,
    pub p1_db: f64,
    pub fidelity: f64,
    pub infidelity: f64,
    pub fidelity_blue: f64,
    pub fidelity_red: f64,
}

/// `eta_thresholds.csv` row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaThresholdRow {
    pub budget: f64,
    pub eta_th_nodpd: f64,
    pub eta_th_dpd: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub a_corr: f64,
    pub eta_corr_nodpd: f64,
    pub eta_corr_dpd: f64,
    pub n_points: usize,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub points: Vec<SimulationPoint>,
    pub spectral: Vec<SpectralRow>,
    pub fidelity: Vec<FidelityRow>,
    pub efficiency: Vec<EfficiencyRow<f64>>,
    pub thresholds: Vec<ThresholdRow<f64>>,
    pub eta_thresholds: Vec<EtaThresholdRow>,
    pub summary: SweepSummary,
}

pub const SPECTRAL_FILE: &str = "spectral_sweep.csv";
pub const FIDELITY_FILE: &str = "fidelity_vs_eta.csv";
pub const THRESHOLDS_FILE: &str = "thresholds.csv";
pub const ETA_THRESHOLDS_FILE: &str = "eta_thresholds.csv";
pub const EFFICIENCY_FILE: &str = "efficiency.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// Uniform drive grid `step, 2·step, …, 1`.
pub fn drive_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(invalid("grid step must lie in (0, 1]"));
    }
    let n = (1.0 / step).round() as usize;
    Ok((1..=n).map(|k| k as f64 / n as f64).collect())
}

/// Simulates every `(A, dpd)` pair on `drives` in parallel. Noise seeds are
/// drawn in grid order from one generator seeded with `cfg.seed`, and results
/// come back in grid order, so output is independent of scheduling.
pub fn sweep(drives: &[f64], modulator: &Modulator, cfg: &SimulationConfig) -> Result<SweepOutput> {
    cfg.validate()?;
    if drives.is_empty() {
        return Err(invalid("empty drive grid"));
    }
    let mut master = ChaCha8Rng::seed_from_u64(cfg.seed);
    let jobs: Vec<(f64, bool, u64)> = drives
        .iter()
        .flat_map(|&a| [(a, false), (a, true)])
        .map(|(a, d)| (a, d, master.next_u64()))
        .collect();
    let points = jobs
        .par_iter()
        .map(|&(a, d, seed)| simulate_point(a, d, modulator, cfg, seed))
        .collect::<Result<Vec<_>>>()?;

    let mut spectral = Vec::with_capacity(points.len());
    for pair in points.chunks(2) {
        let (off, on) = (&pair[0], &pair[1]);
        for p in [off, on] {
            spectral.push(SpectralRow {
                a: p.drive,
                dpd: p.dpd,
                r10_db: p.r10_db,
                r23_db: p.r23_db,
                dp1_db: p.p1_db - off.p1_db,
                dp2_db: p.p2_db - off.p2_db,
                eta_bar: p.eta_bar,
            });
        }
    }
    let nan = f64::NAN;
    let fidelity: Vec<FidelityRow> = points
        .iter()
        .map(|p| {
            let f = p.fidelity.as_ref();
            FidelityRow {
                a: p.drive,
                dpd: p.dpd,
                eta_bar: p.eta_bar,
                p1_db: p.p1_db,
                fidelity: f.map_or(nan, |f| f.value),
                infidelity: f.map_or(nan, |f| f.infidelity()),
                fidelity_blue: f.and_then(|f| f.blue).unwrap_or(nan),
                fidelity_red: f.and_then(|f| f.red).unwrap_or(nan),
            }
        })
        .collect();

    let eta_thresholds = eta_threshold_rows(&fidelity, &BUDGETS);

    let shape = synth_cardioid(&cfg.gate(1.0), cfg.sample_rate, 1)?;
    let grid: Vec<f64> = default_drive_grid(EFFICIENCY_GRID);
    let off = eta_bar_grid(&shape, &modulator.amplitude, None, &grid, cfg.eta_ref)?;
    let on = eta_bar_grid(&shape, &modulator.amplitude, Some(&modulator.map), &grid, cfg.eta_ref)?;
    let efficiency = EfficiencyCurve::rows(&off, &on)?;
    let a_corr = modulator.a_corr();

    let opts = cfg.estimate_options();
    let thresholds = im_threshold_table(&THRESHOLD_TARGETS, cfg.nbar, &opts)?;

    Ok(SweepOutput {
        summary: SweepSummary {
            a_corr,
            eta_corr_nodpd: off.eval(a_corr),
            eta_corr_dpd: on.eval(a_corr),
            n_points: points.len(),
            seed: cfg.seed,
        },
        points,
        spectral,
        fidelity,
        efficiency,
        thresholds,
        eta_thresholds,
    })
}

/// Threshold efficiencies per budget; a budget the curve never crosses reads
/// as NaN.
pub fn eta_threshold_rows(rows: &[FidelityRow], budgets: &[f64]) -> Vec<EtaThresholdRow> {
    let curve = |dpd: bool| -> Vec<(f64, f64)> {
        rows.iter()
            .filter(|r| r.dpd == dpd && r.infidelity.is_finite() && r.eta_bar > 0.0)
            .map(|r| (r.eta_bar, r.infidelity))
            .collect()
    };
    let (off, on) = (curve(false), curve(true));
    budgets
        .iter()
        .map(|&b| {
            let n = threshold_efficiency(&off, b).unwrap_or(f64::NAN);
            let d = threshold_efficiency(&on, b).unwrap_or(f64::NAN);
            EtaThresholdRow {
                budget: b,
                eta_th_nodpd: n,
                eta_th_dpd: d,
                ratio: d / n,
            }
        })
        .collect()
}

impl SweepOutput {
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        write_csv_file(&self.spectral, &dir.join(SPECTRAL_FILE))?;
        write_csv_file(&self.fidelity, &dir.join(FIDELITY_FILE))?;
        write_csv_file(&self.thresholds, &dir.join(THRESHOLDS_FILE))?;
        write_csv_file(&self.eta_thresholds, &dir.join(ETA_THRESHOLDS_FILE))?;
        write_csv_file(&self.efficiency, &dir.join(EFFICIENCY_FILE))?;
        crate::io::write_json_file(&self.summary, &dir.join(SUMMARY_FILE))?;
        Ok(())
    }
}
