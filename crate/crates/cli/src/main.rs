use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use aom_dpd::analysis::{
    bell_fidelity, fit_axes, merge_parity, parity_mle, pool_populations, population_fidelity, AxisPoint, Measured,
    ParityFit,
};
use aom_dpd::fidelity::{
    estimate_from_sidebands, im_threshold_table, phase_space_trace, DriveSpectrum, DriveTone, EstimateOptions,
    THRESHOLD_TARGETS,
};
use aom_dpd::io::{
    load_manifest, read_calibration, read_csv_file, read_json_file, read_waveform_file, write_csv, write_waveform,
    ModelFile, WaveformFormat,
};
use aom_dpd::pipeline::{drive_grid, simulate_point, spectrum_reports, sweep, Modulator, SimulationConfig};
use aom_dpd::spectral::{average_ratios, ToneReport};
use aom_dpd::transfer::{
    fit_amplitude, fit_phase, stability_stats, PolynomialTransfer, ResponseKind, StabilityReport, AMPLITUDE_ORDER,
    PHASE_FIT_RANGE, PHASE_ORDER,
};
use aom_dpd::waveform::{predistort, synth_cardioid};
use aom_dpd::Error;

const EXIT_INPUT: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const DEFAULT_STEP: f64 = 0.05;

#[derive(Parser)]
#[command(name = "aomdpd", version, about = "AOM predistortion and gate-fidelity toolkit")]
struct Cli {
    /// Directory for multi-file outputs and relative `--output` paths.
    #[arg(long, global = true, env = "AOMDPD_OUT_DIR")]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit amplitude (and optionally phase) polynomials to calibration CSVs.
    FitTransfer(FitTransferArgs),
    /// Tabulate the predistortion map `u -> A`.
    Invert(InvertArgs),
    /// Synthesize a Cardioid(1,2) drive waveform.
    Synth(SynthArgs),
    /// Predistort a drive waveform.
    Predistort(PredistortArgs),
    /// Simulate one drive setting end to end.
    Simulate(SimulateArgs),
    /// Beat-note tone reports for a drive waveform.
    Spectrum(SpectrumArgs),
    /// Fidelity estimate from tone reports.
    EstimateFidelity(EstimateArgs),
    /// Sweep drive amplitude with and without predistortion.
    Sweep(SweepArgs),
    /// IM suppression needed for a set of infidelity targets.
    Thresholds(ThresholdArgs),
    /// Bell-state fidelities from an experiment manifest.
    Analyze(AnalyzeArgs),
    /// Fit the rate and fidelity axis corrections.
    FitAxes(FitAxesArgs),
    /// Spread of repeated transfer calibrations.
    Stability(StabilityArgs),
    /// Phase-space trajectory of a drive spectrum.
    Trace(TraceArgs),
}

#[derive(Args)]
struct OutputArg {
    /// Output file; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Default)]
struct ModelArgs {
    /// Modulator model written by `fit-transfer`.
    #[arg(long, conflicts_with = "reference_model")]
    model: Option<PathBuf>,
    /// Use the built-in reference modulator (the default).
    #[arg(long)]
    reference_model: bool,
}

/// Simulation settings; each flag overrides the config file.
#[derive(Args, Default)]
struct SimArgs {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    xi0: Option<f64>,
    #[arg(long)]
    f_det: Option<f64>,
    #[arg(long)]
    sample_rate: Option<f64>,
    #[arg(long)]
    periods: Option<usize>,
    #[arg(long)]
    eta_ref: Option<f64>,
    #[arg(long)]
    nbar: Option<f64>,
    #[arg(long)]
    eta_ld: Option<f64>,
    /// Leave the phase response out of the modulator model.
    #[arg(long)]
    no_phase: bool,
    /// Beat-record noise standard deviation.
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct FitTransferArgs {
    /// Amplitude calibration CSV, `drive,value`.
    #[arg(long)]
    amplitude: PathBuf,
    /// Phase calibration CSV, `drive,value` in rad.
    #[arg(long)]
    phase: Option<PathBuf>,
    #[arg(long, default_value_t = AMPLITUDE_ORDER)]
    order: usize,
    #[arg(long, default_value_t = PHASE_ORDER)]
    phase_order: usize,
    /// Rescale the amplitude data to unit slope at the origin before fitting.
    #[arg(long)]
    normalize: bool,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Args)]
struct InvertArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Number of table rows over `[0, a_corr]`.
    #[arg(long, default_value_t = 1001)]
    points: usize,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for WaveformFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => WaveformFormat::Csv,
            Format::Json => WaveformFormat::Json,
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Peak drive amplitude.
    #[arg(long)]
    drive: f64,
    /// Predistort against the modulator model.
    #[arg(long)]
    dpd: bool,
    #[command(flatten)]
    sim: SimArgs,
    /// Output format; guessed from the extension when omitted.
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Args)]
struct PredistortArgs {
    /// Waveform CSV or JSON.
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    drive: f64,
    #[arg(long)]
    dpd: bool,
    #[command(flatten)]
    sim: SimArgs,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Args)]
struct SpectrumArgs {
    /// Drive waveform. A CSV file carries no gate definition, so the gate is
    /// rebuilt from the settings with `A` equal to the waveform peak.
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    sim: SimArgs,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Args)]
struct EstimateArgs {
    /// Output of `spectrum` or `simulate`.
    #[arg(long)]
    report: PathBuf,
    #[arg(long, default_value_t = aom_dpd::fidelity::DEFAULT_NBAR)]
    nbar: f64,
    #[arg(long, default_value_t = aom_dpd::fidelity::DEFAULT_ETA_LD)]
    eta_ld: f64,
    #[arg(long, default_value_t = aom_dpd::waveform::DEFAULT_XI0)]
    xi0: f64,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    sim: SimArgs,
    /// Drive grid step.
    #[arg(long)]
    step: Option<f64>,
}

#[derive(Args)]
struct ThresholdArgs {
    #[arg(long, default_value_t = aom_dpd::fidelity::DEFAULT_NBAR)]
    nbar: f64,
    #[arg(long, default_value_t = aom_dpd::fidelity::DEFAULT_ETA_LD)]
    eta_ld: f64,
    #[arg(long, default_value_t = aom_dpd::waveform::DEFAULT_XI0)]
    xi0: f64,
    /// Infidelity targets.
    #[arg(long, value_delimiter = ',')]
    targets: Option<Vec<f64>>,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Experiment manifest JSON.
    manifest: PathBuf,
}

#[derive(Args)]
struct FitAxesArgs {
    /// CSV `r_rel,xi0,sigma_xi0,fidelity,sigma_fidelity,f_pd`.
    points: PathBuf,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Amplitude,
    Phase,
}

#[derive(Args)]
struct StabilityArgs {
    /// Model files from repeated calibrations.
    #[arg(required = true, num_args = 2..)]
    runs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "amplitude")]
    kind: Kind,
    #[command(flatten)]
    out: OutputArg,
}

#[derive(Args)]
struct TraceArgs {
    /// Extra tone as `harmonic:amplitude`, relative to the gate tones.
    #[arg(long = "tone", value_parser = parse_tone)]
    tones: Vec<(u32, f64)>,
    #[arg(long, default_value_t = 1001)]
    samples: usize,
    #[arg(long, default_value_t = aom_dpd::waveform::DEFAULT_XI0)]
    xi0: f64,
    #[arg(long, default_value_t = aom_dpd::fidelity::DEFAULT_ETA_LD)]
    eta_ld: f64,
    #[command(flatten)]
    out: OutputArg,
}

fn parse_tone(s: &str) -> Result<(u32, f64), String> {
    let (n, a) = s.split_once(':').ok_or("expected harmonic:amplitude")?;
    let n = n.trim().parse().map_err(|e| format!("harmonic: {e}"))?;
    let a = a.trim().parse().map_err(|e| format!("amplitude: {e}"))?;
    Ok((n, a))
}

/// Both fitted responses of one modulator.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModulatorFile {
    amplitude: ModelFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    phase: Option<ModelFile>,
}

/// Run configuration file: simulation settings plus model and grid.
#[derive(Debug, Default, Deserialize)]
struct RunConfig {
    #[serde(default)]
    model: Option<PathBuf>,
    #[serde(default)]
    step: Option<f64>,
    #[serde(flatten)]
    simulation: SimulationConfig,
    #[serde(skip)]
    has_seed: bool,
}

/// Tone reports of both sidebands plus their averaged ratios.
#[derive(Debug, Serialize, Deserialize)]
struct SpectrumFile {
    r10_db: f64,
    r23_db: f64,
    blue: ToneReport<f64>,
    red: ToneReport<f64>,
}

#[derive(Serialize)]
struct InverseRow {
    u: f64,
    drive: f64,
}

#[derive(Serialize)]
struct SettingReport {
    drive: f64,
    dpd: bool,
    population: Measured<f64>,
    parity: ParityFit<f64>,
    fidelity: Measured<f64>,
    population_shots: u64,
    parity_shots: u64,
}

struct Ctx {
    out_dir: Option<PathBuf>,
}

impl Ctx {
    fn path(&self, p: &Path) -> PathBuf {
        match &self.out_dir {
            Some(d) if p.is_relative() => d.join(p),
            _ => p.to_path_buf(),
        }
    }

    fn dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    fn sink(&self, out: &OutputArg) -> Result<Box<dyn Write>> {
        Ok(match &out.output {
            Some(p) => {
                let p = self.path(p);
                if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                    std::fs::create_dir_all(parent)?;
                }
                Box::new(BufWriter::new(
                    File::create(&p).with_context(|| format!("creating {}", p.display()))?,
                ))
            }
            None => Box::new(BufWriter::new(io::stdout().lock())),
        })
    }

    fn json<S: Serialize + ?Sized>(&self, value: &S, out: &OutputArg) -> Result<()> {
        let mut w = self.sink(out)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }

    fn csv<S: Serialize>(&self, rows: &[S], out: &OutputArg) -> Result<()> {
        let mut w = self.sink(out)?;
        write_csv(rows, &mut w)?;
        w.flush()?;
        Ok(())
    }
}

fn load_modulator(args: &ModelArgs, from_config: Option<&Path>) -> Result<Modulator> {
    let path = args
        .model
        .as_deref()
        .or(if args.reference_model { None } else { from_config });
    match path {
        None => Ok(Modulator::reference()?),
        Some(p) => {
            let f: ModulatorFile = read_json_file(p).with_context(|| format!("reading model {}", p.display()))?;
            let amplitude = f.amplitude.to_transfer()?;
            let phase = f.phase.map(|m| m.to_transfer()).transpose()?;
            Ok(Modulator::new(amplitude, phase)?)
        }
    }
}

fn run_config(args: &SimArgs) -> Result<RunConfig> {
    let mut rc = match &args.config {
        Some(p) => {
            let value: serde_json::Value = read_json_file(p).with_context(|| format!("reading {}", p.display()))?;
            let has_seed = value.get("seed").is_some();
            let mut rc: RunConfig =
                serde_json::from_value(value).with_context(|| format!("parsing {}", p.display()))?;
            rc.has_seed = has_seed;
            if let (Some(m), Some(base)) = (rc.model.as_mut(), p.parent()) {
                if m.is_relative() {
                    *m = base.join(&*m);
                }
            }
            rc
        }
        None => RunConfig::default(),
    };
    let s = &mut rc.simulation;
    let set = |dst: &mut f64, v: Option<f64>| {
        if let Some(v) = v {
            *dst = v;
        }
    };
    set(&mut s.nu, args.nu);
    set(&mut s.xi0, args.xi0);
    set(&mut s.f_det, args.f_det);
    set(&mut s.sample_rate, args.sample_rate);
    set(&mut s.eta_ref, args.eta_ref);
    set(&mut s.nbar, args.nbar);
    set(&mut s.eta_ld, args.eta_ld);
    set(&mut s.noise_sigma, args.noise_sigma);
    if let Some(n) = args.periods {
        s.n_periods = n;
    }
    if args.no_phase {
        s.with_phase = false;
    }
    if let Some(seed) = args.seed {
        s.seed = seed;
        rc.has_seed = true;
    }
    if s.noise_sigma > 0.0 && !rc.has_seed {
        return Err(Error::InvalidInput("a seed is required when noise is enabled".into()).into());
    }
    s.validate()?;
    Ok(rc)
}

fn fit_transfer(ctx: &Ctx, a: &FitTransferArgs) -> Result<()> {
    let open = |p: &Path| File::open(p).with_context(|| format!("opening {}", p.display()));
    let mut amp = read_calibration(open(&a.amplitude)?, ResponseKind::Amplitude)?;
    if a.normalize {
        amp = amp.normalize_unit_slope()?;
    }
    let amplitude = fit_amplitude(&amp, a.order)?;
    let phase = match &a.phase {
        Some(p) => {
            let data = read_calibration(open(p)?, ResponseKind::Phase)?;
            Some(fit_phase(&data, a.phase_order, PHASE_FIT_RANGE)?)
        }
        None => None,
    };
    let file = ModulatorFile {
        amplitude: ModelFile::from_transfer(&amplitude),
        phase: phase.as_ref().map(ModelFile::from_transfer),
    };
    ctx.json(&file, &a.out)
}

fn invert(ctx: &Ctx, a: &InvertArgs) -> Result<()> {
    if a.points < 2 {
        bail!(Error::InvalidInput("need at least two table points".into()));
    }
    let m = load_modulator(&a.model, None)?;
    let last = (a.points - 1) as f64;
    let rows: Vec<InverseRow> = (0..a.points)
        .map(|i| {
            let u = m.a_corr() * i as f64 / last;
            InverseRow {
                u,
                drive: m.map.drive_for(u),
            }
        })
        .collect();
    ctx.csv(&rows, &a.out)
}

fn waveform_format(format: Option<Format>, out: &OutputArg) -> WaveformFormat {
    match (format, &out.output) {
        (Some(f), _) => f.into(),
        (None, Some(p)) => WaveformFormat::from_path(p),
        (None, None) => WaveformFormat::Csv,
    }
}

fn synth(ctx: &Ctx, a: &SynthArgs) -> Result<()> {
    let rc = run_config(&a.sim)?;
    let cfg = &rc.simulation;
    let mut w = synth_cardioid::<f64>(&cfg.gate(a.drive), cfg.sample_rate, cfg.n_periods)?;
    if a.dpd {
        let m = load_modulator(&a.sim.model, rc.model.as_deref())?;
        w = predistort(&w, &m.map)?;
    }
    let mut sink = ctx.sink(&a.out)?;
    write_waveform(&w, &mut sink, waveform_format(a.format, &a.out))?;
    sink.flush()?;
    Ok(())
}

fn predistort_cmd(ctx: &Ctx, a: &PredistortArgs) -> Result<()> {
    let w = read_waveform_file(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let m = load_modulator(&a.model, None)?;
    let out = predistort(&w, &m.map)?;
    let mut sink = ctx.sink(&a.out)?;
    write_waveform(&out, &mut sink, waveform_format(a.format, &a.out))?;
    sink.flush()?;
    Ok(())
}

fn simulate(ctx: &Ctx, a: &SimulateArgs) -> Result<()> {
    let rc = run_config(&a.sim)?;
    let m = load_modulator(&a.sim.model, rc.model.as_deref())?;
    let p = simulate_point(a.drive, a.dpd, &m, &rc.simulation, rc.simulation.seed)?;
    ctx.json(&p, &a.out)
}

fn spectrum(ctx: &Ctx, a: &SpectrumArgs) -> Result<()> {
    let rc = run_config(&a.sim)?;
    let cfg = &rc.simulation;
    let m = load_modulator(&a.sim.model, rc.model.as_deref())?;
    let mut w = read_waveform_file(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    if w.spec.is_none() {
        w.spec = Some(cfg.gate(w.peak().min(1.0)));
    }
    let (blue, red) = spectrum_reports(&w, &m, cfg, cfg.seed)?;
    let (r10_db, r23_db) = average_ratios(&blue, &red)?;
    ctx.json(
        &SpectrumFile {
            r10_db,
            r23_db,
            blue,
            red,
        },
        &a.out,
    )
}

fn estimate(ctx: &Ctx, a: &EstimateArgs) -> Result<()> {
    let report: SpectrumFile = read_json_file(&a.report).with_context(|| format!("reading {}", a.report.display()))?;
    let opts = EstimateOptions {
        xi0: a.xi0,
        eta_ld: a.eta_ld,
        ..EstimateOptions::default()
    };
    let est = estimate_from_sidebands(&report.blue, &report.red, a.nbar, &opts)?;
    ctx.json(&est, &a.out)
}

fn sweep_cmd(ctx: &Ctx, a: &SweepArgs) -> Result<()> {
    let rc = run_config(&a.sim)?;
    let m = load_modulator(&a.sim.model, rc.model.as_deref())?;
    let grid = drive_grid(a.step.or(rc.step).unwrap_or(DEFAULT_STEP))?;
    let out = sweep(&grid, &m, &rc.simulation)?;
    let dir = ctx.dir();
    out.write(&dir)?;
    eprintln!("wrote sweep of {} points to {}", out.summary.n_points, dir.display());
    Ok(())
}

fn thresholds(ctx: &Ctx, a: &ThresholdArgs) -> Result<()> {
    let opts = EstimateOptions {
        xi0: a.xi0,
        eta_ld: a.eta_ld,
        ..EstimateOptions::default()
    };
    let targets = a.targets.clone().unwrap_or_else(|| THRESHOLD_TARGETS.to_vec());
    let rows = im_threshold_table(&targets, a.nbar, &opts)?;
    ctx.csv(&rows, &a.out)
}

fn analyze(ctx: &Ctx, a: &AnalyzeArgs) -> Result<()> {
    let (manifest, data) = load_manifest(&a.manifest)?;
    let reports = data
        .iter()
        .map(|d| {
            let pop = pool_populations(&d.populations)?;
            let scan = merge_parity(&d.parity)?;
            let population = population_fidelity::<f64>(&pop)?;
            let parity = parity_mle::<f64>(&scan)?;
            let fidelity = bell_fidelity(population, parity.fidelity())?;
            Ok(SettingReport {
                drive: d.setting.drive,
                dpd: d.setting.dpd,
                population,
                parity,
                fidelity,
                population_shots: pop.total,
                parity_shots: scan.total_shots(),
            })
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let dir = ctx.dir();
    std::fs::create_dir_all(&dir)?;
    aom_dpd::io::write_json_file(&reports, &dir.join("fidelity_report.json"))?;
    if let Some(p) = &manifest.axis_points {
        let base = a.manifest.parent().unwrap_or_else(|| Path::new("."));
        let points: Vec<AxisPoint<f64>> = read_csv_file(&base.join(p))?;
        aom_dpd::io::write_json_file(&fit_axes(&points)?, &dir.join("axis_fit.json"))?;
    }
    Ok(())
}

fn fit_axes_cmd(ctx: &Ctx, a: &FitAxesArgs) -> Result<()> {
    let points: Vec<AxisPoint<f64>> =
        read_csv_file(&a.points).with_context(|| format!("reading {}", a.points.display()))?;
    ctx.json(&fit_axes(&points)?, &a.out)
}

fn stability(ctx: &Ctx, a: &StabilityArgs) -> Result<()> {
    let kind = match a.kind {
        Kind::Amplitude => ResponseKind::Amplitude,
        Kind::Phase => ResponseKind::Phase,
    };
    let runs = a
        .runs
        .iter()
        .map(|p| {
            let f: ModulatorFile = read_json_file(p).with_context(|| format!("reading {}", p.display()))?;
            let m = match kind {
                ResponseKind::Amplitude => f.amplitude,
                ResponseKind::Phase => f
                    .phase
                    .ok_or_else(|| Error::InvalidInput(format!("{} has no phase model", p.display())))?,
            };
            Ok(m.to_transfer()?)
        })
        .collect::<Result<Vec<PolynomialTransfer<f64>>>>()?;
    let report: StabilityReport<f64> = stability_stats(&runs, kind)?;
    ctx.json(&report, &a.out)
}

fn trace(ctx: &Ctx, a: &TraceArgs) -> Result<()> {
    let base = DriveSpectrum::<f64>::cardioid(a.xi0, a.eta_ld);
    let r1 = base.tones[0].amplitude;
    let spec = a
        .tones
        .iter()
        .fold(base, |s, &(n, amp)| s.with_tone(DriveTone::new(n, amp * r1)))
        .calibrated()?;
    let out = phase_space_trace(&spec, a.samples)?;
    eprintln!("F = {:.6e}, G = {:.6e}, Phi = {:.12}", out.f, out.g, out.phi);
    ctx.csv(out.trace.as_deref().unwrap_or_default(), &a.out)
}

fn run(cli: Cli) -> Result<()> {
    let ctx = Ctx { out_dir: cli.out_dir };
    match &cli.command {
        Command::FitTransfer(a) => fit_transfer(&ctx, a),
        Command::Invert(a) => invert(&ctx, a),
        Command::Synth(a) => synth(&ctx, a),
        Command::Predistort(a) => predistort_cmd(&ctx, a),
        Command::Simulate(a) => simulate(&ctx, a),
        Command::Spectrum(a) => spectrum(&ctx, a),
        Command::EstimateFidelity(a) => estimate(&ctx, a),
        Command::Sweep(a) => sweep_cmd(&ctx, a),
        Command::Thresholds(a) => thresholds(&ctx, a),
        Command::Analyze(a) => analyze(&ctx, a),
        Command::FitAxes(a) => fit_axes_cmd(&ctx, a),
        Command::Stability(a) => stability(&ctx, a),
        Command::Trace(a) => trace(&ctx, a),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()) {
        Some(e) if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_INPUT,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
