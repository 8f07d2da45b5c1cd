//! File formats: CSV tables and JSON documents read and written by the CLI.
//!
//! Floats are written in shortest round-trip form, so a value read back is
//! bit-identical to the one written.

pub mod float;

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::analysis::{ParityPoint, ParityScan, PopulationRecord, Setting};
use crate::error::{invalid, Result};
use crate::transfer::{CalibrationDataset, PolynomialTransfer, ResponseKind};
use crate::waveform::{GateSpec, IqWaveform};

pub fn write_csv<S: Serialize, W: Write>(rows: &[S], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<D: DeserializeOwned, R: Read>(input: R) -> Result<Vec<D>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    Ok(r.deserialize().collect::<std::result::Result<Vec<D>, _>>()?)
}

pub fn write_csv_file<S: Serialize>(rows: &[S], path: &Path) -> Result<()> {
    write_csv(rows, BufWriter::new(File::create(path)?))
}

pub fn read_csv_file<D: DeserializeOwned>(path: &Path) -> Result<Vec<D>> {
    read_csv(BufReader::new(File::open(path)?))
}

pub fn write_json_file<S: Serialize + ?Sized>(value: &S, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json_file<D: DeserializeOwned>(path: &Path) -> Result<D> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// One row of a calibration CSV, `drive,value`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub drive: f64,
    pub value: f64,
}

pub fn read_calibration<R: Read>(input: R, kind: ResponseKind) -> Result<CalibrationDataset<f64>> {
    let rows: Vec<CalibrationRow> = read_csv(input)?;
    CalibrationDataset::new(kind, rows.into_iter().map(|r| (r.drive, r.value)))
}

pub fn write_calibration<W: Write>(data: &CalibrationDataset<f64>, out: W) -> Result<()> {
    let rows: Vec<CalibrationRow> = data
        .points()
        .map(|(drive, value)| CalibrationRow { drive, value })
        .collect();
    write_csv(&rows, out)
}

/// Fitted model document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub kind: ResponseKind,
    pub order: usize,
    /// `coefficients[k-1]` multiplies `A^k`.
    pub coefficients: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_corr: Option<f64>,
    #[serde(default)]
    pub residual_rms: f64,
}

impl ModelFile {
    pub fn from_transfer(t: &PolynomialTransfer<f64>) -> Self {
        Self {
            kind: t.kind(),
            order: t.order(),
            coefficients: t.coefficients().to_vec(),
            a_corr: t.a_corr().ok(),
            residual_rms: t.residual_rms(),
        }
    }

    pub fn to_transfer(&self) -> Result<PolynomialTransfer<f64>> {
        if self.order != self.coefficients.len() {
            return Err(invalid(format!(
                "model order {} does not match {} coefficients",
                self.order,
                self.coefficients.len()
            )));
        }
        Ok(PolynomialTransfer::new(self.kind, self.coefficients.clone())?.with_residual_rms(self.residual_rms))
    }
}

pub fn read_model(path: &Path) -> Result<PolynomialTransfer<f64>> {
    read_json_file::<ModelFile>(path)?.to_transfer()
}

pub fn write_model(t: &PolynomialTransfer<f64>, path: &Path) -> Result<()> {
    write_json_file(&ModelFile::from_transfer(t), path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WaveformFormat {
    Csv,
    Json,
}

impl WaveformFormat {
    /// Guesses from the file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => WaveformFormat::Json,
            _ => WaveformFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveformRow {
    pub t: f64,
    pub i: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformFile {
    pub sample_rate: f64,
    /// `[i, q]` pairs.
    pub samples: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<GateSpec>,
    #[serde(default)]
    pub dpd: bool,
}

pub fn write_waveform<W: Write>(w: &IqWaveform<f64>, out: W, format: WaveformFormat) -> Result<()> {
    match format {
        WaveformFormat::Csv => {
            let rows: Vec<WaveformRow> = w
                .samples
                .iter()
                .enumerate()
                .map(|(k, s)| WaveformRow {
                    t: w.time(k),
                    i: s.re,
                    q: s.im,
                })
                .collect();
            write_csv(&rows, out)
        }
        WaveformFormat::Json => {
            let file = WaveformFile {
                sample_rate: w.sample_rate,
                samples: w.samples.iter().map(|s| [s.re, s.im]).collect(),
                spec: w.spec.clone(),
                dpd: w.dpd,
            };
            let mut out = out;
            serde_json::to_writer(&mut out, &file)?;
            out.write_all(b"\n")?;
            Ok(())
        }
    }
}

/// Reads a waveform; a CSV record's sample rate comes from its time column.
pub fn read_waveform<R: Read>(input: R, format: WaveformFormat) -> Result<IqWaveform<f64>> {
    match format {
        WaveformFormat::Csv => {
            let rows: Vec<WaveformRow> = read_csv(input)?;
            if rows.len() < 2 {
                return Err(invalid("waveform CSV needs at least two samples"));
            }
            let span = rows[rows.len() - 1].t - rows[0].t;
            if !(span > 0.0) {
                return Err(invalid("waveform time column must increase"));
            }
            let fs = (rows.len() - 1) as f64 / span;
            Ok(IqWaveform::new(
                fs,
                rows.iter().map(|r| Complex::new(r.i, r.q)).collect(),
            ))
        }
        WaveformFormat::Json => {
            let f: WaveformFile = serde_json::from_reader(input)?;
            if !(f.sample_rate > 0.0) {
                return Err(invalid("sample rate must be positive"));
            }
            let mut w = IqWaveform::new(
                f.sample_rate,
                f.samples.iter().map(|s| Complex::new(s[0], s[1])).collect(),
            );
            w.spec = f.spec;
            w.dpd = f.dpd;
            Ok(w)
        }
    }
}

pub fn read_waveform_file(path: &Path) -> Result<IqWaveform<f64>> {
    read_waveform(BufReader::new(File::open(path)?), WaveformFormat::from_path(path))
}

pub fn write_waveform_file(w: &IqWaveform<f64>, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_waveform(w, &mut out, WaveformFormat::from_path(path))?;
    out.flush()?;
    Ok(())
}

/// One row of a parity CSV, `phase_rad,even_count,total`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParityRow {
    pub phase_rad: f64,
    pub even_count: u64,
    pub total: u64,
}

/// One row of a population CSV, `even_count,total`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopulationRow {
    pub even_count: u64,
    pub total: u64,
}

pub fn read_parity<R: Read>(input: R) -> Result<ParityScan> {
    let rows: Vec<ParityRow> = read_csv(input)?;
    ParityScan::new(
        rows.into_iter()
            .map(|r| ParityPoint {
                phase: r.phase_rad,
                even_count: r.even_count,
                total: r.total,
            })
            .collect(),
    )
}

pub fn write_parity<W: Write>(scan: &ParityScan, out: W) -> Result<()> {
    let rows: Vec<ParityRow> = scan
        .points
        .iter()
        .map(|p| ParityRow {
            phase_rad: p.phase,
            even_count: p.even_count,
            total: p.total,
        })
        .collect();
    write_csv(&rows, out)
}

/// Every row of a population file; a file may hold several repetitions.
pub fn read_populations<R: Read>(input: R) -> Result<Vec<PopulationRecord>> {
    let rows: Vec<PopulationRow> = read_csv(input)?;
    rows.into_iter()
        .map(|r| PopulationRecord::new(r.even_count, r.total))
        .collect()
}

pub fn write_populations<W: Write>(records: &[PopulationRecord], out: W) -> Result<()> {
    let rows: Vec<PopulationRow> = records
        .iter()
        .map(|r| PopulationRow {
            even_count: r.even_count,
            total: r.total,
        })
        .collect();
    write_csv(&rows, out)
}

/// Experiment files grouped by setting. Paths are relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub settings: Vec<ManifestEntry>,
    /// Optional axis-fit table, `r_rel,xi0,sigma_xi0,fidelity,sigma_fidelity,f_pd`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis_points: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub drive: f64,
    pub dpd: bool,
    #[serde(default)]
    pub population: Vec<PathBuf>,
    #[serde(default)]
    pub parity: Vec<PathBuf>,
}

impl ManifestEntry {
    pub fn setting(&self) -> Setting {
        Setting::new(self.drive, self.dpd)
    }
}

/// Loaded manifest entry.
#[derive(Debug, Clone)]
pub struct SettingData {
    pub setting: Setting,
    pub populations: Vec<PopulationRecord>,
    pub parity: Vec<ParityScan>,
}

pub fn load_manifest(path: &Path) -> Result<(Manifest, Vec<SettingData>)> {
    let manifest: Manifest = read_json_file(path)?;
    if manifest.settings.is_empty() {
        return Err(invalid("manifest lists no settings"));
    }
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let open = |p: &Path| -> Result<BufReader<File>> {
        let full = base.join(p);
        File::open(&full)
            .map(BufReader::new)
            .map_err(|e| invalid(format!("{}: {e}", full.display())))
    };
    let data = manifest
        .settings
        .iter()
        .map(|e| {
            let setting = e.setting();
            if e.population.is_empty() || e.parity.is_empty() {
                return Err(invalid(format!(
                    "setting A = {}, dpd = {} needs population and parity files",
                    e.drive, e.dpd
                )));
            }
            let mut populations = Vec::new();
            for p in &e.population {
                populations.extend(read_populations(open(p)?)?.into_iter().map(|r| r.at(setting)));
            }
            let parity = e
                .parity
                .iter()
                .map(|p| Ok(read_parity(open(p)?)?.at(setting)))
                .collect::<Result<Vec<_>>>()?;
            Ok(SettingData {
                setting,
                populations,
                parity,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transfer::{reference_model, REFERENCE_A_CORR};

    #[test]
    fn model_round_trip() {
        let m = reference_model::<f64>().amplitude;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        write_model(&m, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"kind\": \"amplitude\"") && text.contains("\"a_corr\""));
        let back = read_model(&path).unwrap();
        assert_eq!(back, m);
        assert!((back.a_corr().unwrap() - REFERENCE_A_CORR).abs() < 1e-5);
        let bad = r#"{"kind":"phase","order":3,"coefficients":[1.0]}"#;
        let f: ModelFile = serde_json::from_str(bad).unwrap();
        assert!(f.to_transfer().is_err());
    }

    #[test]
    fn calibration_round_trip() {
        let data = CalibrationDataset::new(ResponseKind::Amplitude, vec![(0.1, 0.1), (0.5, 0.45), (1.0, 0.7)]).unwrap();
        let mut buf = Vec::new();
        write_calibration(&data, &mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("drive,value\n"));
        assert_eq!(read_calibration(&buf[..], ResponseKind::Amplitude).unwrap(), data);
        let descending = b"drive,value\n0.5,0.4\n0.2,0.2\n";
        assert!(read_calibration(&descending[..], ResponseKind::Amplitude).is_err());
    }

    #[test]
    fn waveform_round_trips() {
        let w = IqWaveform::from_real(1e6, (0..50).map(|k| (k as f64 * 0.37).sin() / 3.0));
        for fmt in [WaveformFormat::Csv, WaveformFormat::Json] {
            let mut buf = Vec::new();
            write_waveform(&w, &mut buf, fmt).unwrap();
            let back = read_waveform(&buf[..], fmt).unwrap();
            assert_eq!(back.samples, w.samples);
            assert!((back.sample_rate - 1e6).abs() < 1e-6);
        }
        let mut buf = Vec::new();
        write_waveform(&w, &mut buf, WaveformFormat::Csv).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("t,i,q\n"));
    }

    #[test]
    fn experiment_files() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("pop.csv"), "even_count,total\n600,625\n590,625\n").unwrap();
        std::fs::write(
            dir.path().join("par.csv"),
            "phase_rad,even_count,total\n0.0,600,625\n0.785,300,625\n1.571,25,625\n2.356,320,625\n",
        )
        .unwrap();
        std::fs::write(
            dir.path().join("m.json"),
            r#"{"settings":[{"drive":0.6,"dpd":true,"population":["pop.csv"],"parity":["par.csv"]}]}"#,
        )
        .unwrap();
        let (_, data) = load_manifest(&dir.path().join("m.json")).unwrap();
        assert_eq!(data.len(), 1);
        assert_eq!(data[0].populations.len(), 2);
        assert_eq!(data[0].parity[0].points.len(), 4);
        assert_eq!(data[0].parity[0].setting, Some(Setting::new(0.6, true)));

        std::fs::write(dir.path().join("empty.json"), r#"{"settings":[]}"#).unwrap();
        assert!(load_manifest(&dir.path().join("empty.json")).is_err());
        std::fs::write(
            dir.path().join("missing.json"),
            r#"{"settings":[{"drive":0.6,"dpd":true,"population":["nope.csv"],"parity":["par.csv"]}]}"#,
        )
        .unwrap();
        assert!(load_manifest(&dir.path().join("missing.json")).is_err());
    }

    #[test]
    fn parity_csv_round_trip() {
        let scan = crate::analysis::expected_parity_scan(0.9, 0.1, 16, 625).unwrap();
        let mut buf = Vec::new();
        write_parity(&scan, &mut buf).unwrap();
        assert_eq!(read_parity(&buf[..]).unwrap(), scan);
    }
}
