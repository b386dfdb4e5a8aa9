//! End-to-end runs: propagate, sample, optionally count, analyze, write.
//!
//! A run is fully described by a [`RunConfig`]. Every run writes a manifest
//! that is itself a valid config file, so re-running a manifest reproduces
//! the outputs (bit-identically without counting, per seed with it).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::acquisition::{
    delta_histogram, simulate_counts, synthesize_series, BranchSeries, CountingParams,
    FoldedHistogram, TimeGrid,
};
use crate::beamline::{
    mean_intensity, propagate, ContrastMatrix, EcSign, Engine, Port, ScenarioConfig,
};
use crate::error::{Error, Result};
use crate::presets::preset;
use crate::spectral::{
    fit_sines, magnitude_spectrum, peak_heights, preprocess, MagnitudeSpectrum, PeakReport,
    SineFitResult, DEFAULT_HALF_WINDOW_HZ, DEFAULT_PAD_FACTOR,
};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisParams {
    pub pad_factor: usize,
    /// Search targets in Hz; the scenario's difference lines when absent.
    pub targets: Option<Vec<f64>>,
    pub half_window: f64,
    /// Further ports analyzed by moving the compensator and analyzer there.
    pub extra_ports: Vec<Port>,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        Self {
            pad_factor: DEFAULT_PAD_FACTOR,
            targets: None,
            half_window: DEFAULT_HALF_WINDOW_HZ,
            extra_ports: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub name: String,
    pub scenario: ScenarioConfig,
    pub grid: TimeGrid,
    pub acquisition: Option<CountingParams>,
    pub analysis: AnalysisParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            name: "custom".into(),
            scenario: ScenarioConfig::default(),
            grid: TimeGrid::default(),
            acquisition: None,
            analysis: AnalysisParams::default(),
        }
    }
}

impl RunConfig {
    pub fn from_preset(name: &str) -> Result<Self> {
        let scenario = preset(name)?;
        let extra_ports = if scenario.premark.is_some() {
            vec![Port::H1]
        } else {
            Vec::new()
        };
        Ok(Self {
            name: name.to_string(),
            scenario,
            analysis: AnalysisParams {
                extra_ports,
                ..Default::default()
            },
            ..Default::default()
        })
    }

    pub fn targets(&self) -> Vec<f64> {
        match &self.analysis.targets {
            Some(t) => t.clone(),
            None => self
                .scenario
                .difference_lines()
                .iter()
                .map(|(_, f)| f.hz())
                .collect(),
        }
    }
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    serde_json::from_str(text).map_err(|source| Error::Json {
        path: path.display().to_string(),
        source,
    })
}

/// A preset name, or a path to a JSON config or manifest.
pub fn load_config(source: &str) -> Result<RunConfig> {
    let path = Path::new(source);
    if path.is_file() {
        let mut cfg: RunConfig = parse_json(&read_file(path)?, path)?;
        if cfg.name == RunConfig::default().name {
            if let Some(stem) = path.file_stem() {
                cfg.name = stem.to_string_lossy().into_owned();
            }
        }
        cfg.scenario.validate()?;
        Ok(cfg)
    } else {
        RunConfig::from_preset(source)
    }
}

/// Contrast setting given on the command line.
#[derive(Clone, Debug, PartialEq)]
pub enum ContrastChoice {
    Ideal,
    Measured,
    File(PathBuf),
}

impl ContrastChoice {
    pub fn parse(s: &str) -> Self {
        match s {
            "ideal" => ContrastChoice::Ideal,
            "paper" => ContrastChoice::Measured,
            path => ContrastChoice::File(PathBuf::from(path)),
        }
    }

    pub fn resolve(&self) -> Result<ContrastMatrix> {
        match self {
            ContrastChoice::Ideal => Ok(ContrastMatrix::ideal()),
            ContrastChoice::Measured => Ok(ContrastMatrix::measured()),
            ContrastChoice::File(p) => parse_json(&read_file(p)?, p).map_err(|e| match e {
                Error::Json { path, source } if source.is_data() => {
                    Error::Config(format!("contrast file {path}: {source}"))
                }
                other => other,
            }),
        }
    }
}

/// Command-line adjustments applied on top of a loaded config.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub contrast: Option<ContrastChoice>,
    pub engine: Option<Engine>,
    pub counts: Option<f64>,
    pub hours: Option<f64>,
    pub seed: Option<u64>,
    pub pad: Option<usize>,
    pub bins: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut RunConfig) -> Result<()> {
        if let Some(c) = &self.contrast {
            cfg.scenario.contrast = c.resolve()?;
        }
        if let Some(e) = self.engine {
            cfg.scenario.engine = e;
        }
        if let Some(p) = self.pad {
            cfg.analysis.pad_factor = p;
        }
        let wants_counts = self.counts.is_some() || self.hours.is_some() || self.seed.is_some() || self.bins.is_some();
        if wants_counts {
            let mut acq = cfg.acquisition.unwrap_or(CountingParams {
                rate: 100.0,
                total_time: 24.0 * 3600.0,
                n_bins: cfg.grid.n_samples,
                fold_period: None,
                seed: 0,
            });
            if let Some(r) = self.counts {
                acq.rate = r;
            }
            if let Some(h) = self.hours {
                acq.total_time = h * 3600.0;
            }
            if let Some(s) = self.seed {
                acq.seed = s;
            }
            if let Some(b) = self.bins {
                acq.n_bins = b;
            }
            cfg.acquisition = Some(acq);
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PortAnalysis {
    pub port: Port,
    pub peaks: PeakReport,
}

/// Everything a run computes.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub series: BranchSeries,
    pub histogram: Option<FoldedHistogram>,
    pub spectrum: MagnitudeSpectrum,
    pub peaks: PeakReport,
    pub fit: SineFitResult,
    pub mean_intensity_plus: f64,
    pub mean_intensity_minus: f64,
    pub extra_ports: Vec<PortAnalysis>,
}

impl RunOutcome {
    pub fn truncation_warning(&self) -> bool {
        self.series.truncation_warning
    }
}

/// Spectrum, peaks and fit of a ΔI record.
#[derive(Clone, Debug)]
pub struct Analysis {
    pub spectrum: MagnitudeSpectrum,
    pub peaks: PeakReport,
    pub fit: SineFitResult,
}

pub fn analyze(
    values: &[f64],
    sigmas: Option<&[f64]>,
    times: &[f64],
    sample_rate: f64,
    targets: &[f64],
    params: &AnalysisParams,
) -> Result<Analysis> {
    let spectrum = magnitude_spectrum(&preprocess(values, params.pad_factor)?, sample_rate)?;
    let peaks = peak_heights(&spectrum, targets, params.half_window)?;
    let fit = fit_sines(values, sigmas, times, targets)?;
    Ok(Analysis {
        spectrum,
        peaks,
        fit,
    })
}

/// Noise-free peak report of the ΔI series.
pub fn series_peaks(scenario: &ScenarioConfig, grid: &TimeGrid, targets: &[f64], params: &AnalysisParams) -> Result<PeakReport> {
    let series = synthesize_series(scenario, grid)?;
    let spectrum = magnitude_spectrum(&preprocess(&series.delta.values, params.pad_factor)?, grid.sample_rate)?;
    peak_heights(&spectrum, targets, params.half_window)
}

pub fn execute(cfg: &RunConfig) -> Result<RunOutcome> {
    let scenario = &cfg.scenario;
    let targets = cfg.targets();
    let series = synthesize_series(scenario, &cfg.grid)?;

    let (analysis, histogram) = match &cfg.acquisition {
        None => {
            let times = cfg.grid.times();
            let a = analyze(&series.delta.values, None, &times, cfg.grid.sample_rate, &targets, &cfg.analysis)?;
            (a, None)
        }
        Some(acq) => {
            let period = acq.fold_period.unwrap_or_else(|| cfg.grid.duration());
            let max_line = targets.iter().copied().fold(0.0, f64::max);
            if acq.n_bins as f64 / period <= 2.0 * max_line {
                return Err(Error::Config(format!(
                    "{} bins per {period} s cannot resolve the {max_line} Hz line",
                    acq.n_bins
                )));
            }
            let hist = simulate_counts(&series.plus, &series.minus, acq)?;
            let delta = delta_histogram(&hist)?.in_intensity_units(hist.rate.max(f64::MIN_POSITIVE));
            // empty bins get the sigma of a single count
            let floor = 1.0 / (hist.live_time_per_bin() * hist.rate.max(f64::MIN_POSITIVE));
            let sigmas: Vec<f64> = delta.sigmas.iter().map(|&s| if s > 0.0 { s } else { floor }).collect();
            let bin_rate = hist.n_bins as f64 / hist.period;
            let a = analyze(&delta.values, Some(&sigmas), &hist.bin_times, bin_rate, &targets, &cfg.analysis)?;
            (a, Some(hist))
        }
    };

    let mean = |sign| -> Result<f64> {
        Ok(mean_intensity(propagate(scenario, sign)?.detector(), &scenario.contrast))
    };
    let extra_ports = cfg
        .analysis
        .extra_ports
        .iter()
        .map(|&port| {
            let moved = ScenarioConfig {
                detector: port,
                ..scenario.clone()
            };
            Ok(PortAnalysis {
                port,
                peaks: series_peaks(&moved, &cfg.grid, &targets, &cfg.analysis)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(RunOutcome {
        mean_intensity_plus: mean(EcSign::Plus)?,
        mean_intensity_minus: mean(EcSign::Minus)?,
        series,
        histogram,
        spectrum: analysis.spectrum,
        peaks: analysis.peaks,
        fit: analysis.fit,
        extra_ports,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub name: String,
    pub peaks: PeakReport,
    pub fit: SineFitResult,
    pub mean_intensity_plus: f64,
    pub mean_intensity_minus: f64,
    pub total_counts: Option<u64>,
    pub extra_ports: Vec<PortAnalysis>,
    pub truncation_warning: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    #[serde(flatten)]
    pub config: RunConfig,
    pub tool_version: String,
    pub created_unix: u64,
    pub outputs: Vec<String>,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("run records serialize");
    s.push('\n');
    s
}

pub fn timeseries_csv(series: &BranchSeries) -> String {
    let mut out = String::from("t,I_plus,I_minus,delta_I\n");
    for n in 0..series.delta.values.len() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            series.delta.grid.time(n),
            series.plus.values[n],
            series.minus.values[n],
            series.delta.values[n]
        );
    }
    out
}

pub fn histogram_csv(hist: &FoldedHistogram) -> Result<String> {
    let delta = delta_histogram(hist)?.in_intensity_units(hist.rate.max(f64::MIN_POSITIVE));
    let mut out = String::from("bin_center,n_plus,n_minus,delta_I,sigma\n");
    for b in 0..hist.n_bins {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            hist.bin_times[b], hist.counts_plus[b], hist.counts_minus[b], delta.values[b], delta.sigmas[b]
        );
    }
    Ok(out)
}

pub fn spectrum_csv(spec: &MagnitudeSpectrum) -> String {
    let mut out = String::from("frequency,magnitude\n");
    for (f, m) in spec.freq_bins.iter().zip(&spec.magnitudes) {
        let _ = writeln!(out, "{f},{m}");
    }
    out
}

/// Writes tables, report and manifest into `dir`.
pub fn write_outputs(cfg: &RunConfig, outcome: &RunOutcome, dir: &Path) -> Result<RunManifest> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut outputs = Vec::new();
    let mut emit = |file: &str, contents: String| -> Result<()> {
        write_file(&dir.join(file), &contents)?;
        outputs.push(file.to_string());
        Ok(())
    };
    emit("timeseries.csv", timeseries_csv(&outcome.series))?;
    if let Some(h) = &outcome.histogram {
        emit("histogram.csv", histogram_csv(h)?)?;
    }
    emit("spectrum.csv", spectrum_csv(&outcome.spectrum))?;
    let report = RunReport {
        name: cfg.name.clone(),
        peaks: outcome.peaks.clone(),
        fit: outcome.fit.clone(),
        mean_intensity_plus: outcome.mean_intensity_plus,
        mean_intensity_minus: outcome.mean_intensity_minus,
        total_counts: outcome.histogram.as_ref().map(FoldedHistogram::total_counts),
        extra_ports: outcome.extra_ports.clone(),
        truncation_warning: outcome.truncation_warning(),
    };
    emit("report.json", to_json(&report))?;

    outputs.push("manifest.json".into());
    let manifest = RunManifest {
        config: cfg.clone(),
        tool_version: TOOL_VERSION.into(),
        created_unix: SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        outputs,
    };
    write_file(&dir.join("manifest.json"), &to_json(&manifest))?;
    Ok(manifest)
}

/// Runs several configs concurrently, each into `out/<name>` (or straight
/// into `out` for a single config).
pub fn run_batch(configs: &[RunConfig], out: &Path) -> Vec<Result<RunManifest>> {
    let single = configs.len() == 1;
    std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|cfg| {
                let dir = if single { out.to_path_buf() } else { out.join(&cfg.name) };
                scope.spawn(move || execute(cfg).and_then(|o| write_outputs(cfg, &o, &dir)))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::InvalidState("run thread panicked".into()))))
            .collect()
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakComparison {
    pub target: f64,
    pub first_order: f64,
    pub exact: f64,
    pub first_order_normalized: f64,
    pub exact_normalized: f64,
    /// Relative difference of the normalized heights; `None` for lines absent
    /// in the first-order spectrum.
    pub rel_diff: Option<f64>,
    pub rel_diff_absolute: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub name: String,
    pub peaks: Vec<PeakComparison>,
    /// Largest relative difference of normalized peak heights.
    pub max_rel_diff: f64,
    pub max_rel_diff_absolute: f64,
    pub truncation_warning: bool,
}

/// Lines below this fraction of the strongest line are not compared.
const PRESENT_LINE: f64 = 1e-3;

/// Noise-free peak heights from the first-order and exact engines.
pub fn compare(cfg: &RunConfig) -> Result<CompareReport> {
    let targets = cfg.targets();
    let with = |engine| -> Result<(PeakReport, bool)> {
        let scenario = ScenarioConfig {
            engine,
            ..cfg.scenario.clone()
        };
        let warn = propagate(&scenario, EcSign::Plus)?.truncation_warning();
        Ok((series_peaks(&scenario, &cfg.grid, &targets, &cfg.analysis)?, warn))
    };
    let (first, warn) = with(Engine::FirstOrder)?;
    let (exact, _) = with(Engine::Exact)?;

    let peaks: Vec<PeakComparison> = first
        .peaks
        .iter()
        .zip(&exact.peaks)
        .map(|(f, e)| {
            let present = f.height_normalized > PRESENT_LINE;
            PeakComparison {
                target: f.target,
                first_order: f.height,
                exact: e.height,
                first_order_normalized: f.height_normalized,
                exact_normalized: e.height_normalized,
                rel_diff: present.then(|| (e.height_normalized - f.height_normalized).abs() / f.height_normalized),
                rel_diff_absolute: present.then(|| (e.height - f.height).abs() / f.height),
            }
        })
        .collect();
    let max = |get: fn(&PeakComparison) -> Option<f64>| peaks.iter().filter_map(get).fold(0.0, f64::max);
    Ok(CompareReport {
        name: cfg.name.clone(),
        max_rel_diff: max(|p| p.rel_diff),
        max_rel_diff_absolute: max(|p| p.rel_diff_absolute),
        peaks,
        truncation_warning: warn,
    })
}

pub fn report_json<T: Serialize>(value: &T) -> String {
    to_json(value)
}
