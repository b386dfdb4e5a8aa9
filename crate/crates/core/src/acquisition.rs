//! Detector time series and simulated counting.
//!
//! The two energy-compensation branches are sampled on a uniform time grid.
//! Counting folds the grid stroboscopically onto one folding period and draws
//! Poisson counts per phase bin, one half of the measuring time per branch.

use num_integer::Integer;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::beamline::{intensity_at, propagate, EcSign, ScenarioConfig};
use crate::error::{Error, Result};

/// Largest expected count per bin accepted by [`simulate_counts`].
pub const MAX_EXPECTED_COUNTS: f64 = 1e18;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimeGrid {
    /// Samples per second.
    pub sample_rate: f64,
    pub n_samples: usize,
    pub origin: f64,
}

impl Default for TimeGrid {
    /// 8 ms at 64 kHz: 24 periods of the default 3 kHz line spacing.
    fn default() -> Self {
        Self {
            sample_rate: 64_000.0,
            n_samples: 512,
            origin: 0.0,
        }
    }
}

impl TimeGrid {
    pub fn new(sample_rate: f64, n_samples: usize) -> Self {
        Self {
            sample_rate,
            n_samples,
            origin: 0.0,
        }
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.sample_rate
    }

    pub fn duration(&self) -> f64 {
        self.n_samples as f64 / self.sample_rate
    }

    pub fn time(&self, n: usize) -> f64 {
        self.origin + n as f64 / self.sample_rate
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_samples).map(|n| self.time(n)).collect()
    }

    /// Checks sampling and period alignment against a scenario.
    pub fn validate_for(&self, config: &ScenarioConfig) -> Result<()> {
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) || self.n_samples == 0 {
            return Err(Error::Config(format!(
                "time grid needs a positive sample rate and sample count, got {} Hz x {}",
                self.sample_rate, self.n_samples
            )));
        }
        let max_line = config
            .difference_lines()
            .iter()
            .map(|(_, f)| f.hz())
            .fold(0.0, f64::max);
        if self.sample_rate <= 2.0 * max_line {
            return Err(Error::Config(format!(
                "sample rate {} Hz does not exceed twice the highest line {} Hz",
                self.sample_rate, max_line
            )));
        }
        let periods = self.duration() / folding_period(config);
        if (periods - periods.round()).abs() > 1e-9 || periods.round() < 1.0 {
            return Err(Error::Config(format!(
                "grid duration {} s is not a whole number of folding periods ({periods})",
                self.duration()
            )));
        }
        Ok(())
    }
}

/// Common repetition frequency of all difference lines (their integer gcd).
pub fn folding_frequency_hz(config: &ScenarioConfig) -> i64 {
    config
        .difference_lines()
        .iter()
        .fold(0i64, |g, (_, f)| g.gcd(&f.0))
}

/// Shortest period after which every difference line repeats.
pub fn folding_period(config: &ScenarioConfig) -> f64 {
    1.0 / folding_frequency_hz(config) as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeriesKind {
    Iplus,
    Iminus,
    Delta,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntensitySeries {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub kind: SeriesKind,
}

impl IntensitySeries {
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Both branches and their difference on one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchSeries {
    pub plus: IntensitySeries,
    pub minus: IntensitySeries,
    pub delta: IntensitySeries,
    pub truncation_warning: bool,
}

pub fn synthesize_series(config: &ScenarioConfig, grid: &TimeGrid) -> Result<BranchSeries> {
    grid.validate_for(config)?;
    let plus_port = propagate(config, EcSign::Plus)?;
    let minus_port = propagate(config, EcSign::Minus)?;
    let sample = |port: &crate::beamline::PortStates| -> Result<Vec<f64>> {
        (0..grid.n_samples)
            .map(|n| intensity_at(port.detector(), &config.contrast, grid.time(n)))
            .collect()
    };
    let plus = sample(&plus_port)?;
    let minus = sample(&minus_port)?;
    let delta = plus.iter().zip(&minus).map(|(p, m)| p - m).collect();
    let series = |values, kind| IntensitySeries {
        grid: *grid,
        values,
        kind,
    };
    Ok(BranchSeries {
        plus: series(plus, SeriesKind::Iplus),
        minus: series(minus, SeriesKind::Iminus),
        delta: series(delta, SeriesKind::Delta),
        truncation_warning: plus_port.truncation_warning() || minus_port.truncation_warning(),
    })
}

/// Layout of a stroboscopic fold of a sampled series.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Fold {
    samples_per_period: usize,
    samples_per_bin: usize,
}

fn fold_layout(grid: &TimeGrid, period: f64, n_bins: usize) -> Result<Fold> {
    if n_bins == 0 {
        return Err(Error::Config("histogram needs at least one bin".into()));
    }
    let spp = period * grid.sample_rate;
    let samples_per_period = spp.round() as usize;
    if (spp - spp.round()).abs() > 1e-6 || samples_per_period == 0 {
        return Err(Error::Config(format!(
            "folding period {period} s is not a whole number of samples ({spp})"
        )));
    }
    if !grid.n_samples.is_multiple_of(samples_per_period) {
        return Err(Error::Config(format!(
            "grid of {} samples is not a whole number of {samples_per_period}-sample periods",
            grid.n_samples
        )));
    }
    if !samples_per_period.is_multiple_of(n_bins) {
        return Err(Error::Config(format!(
            "{n_bins} bins do not divide the {samples_per_period} samples of one period"
        )));
    }
    Ok(Fold {
        samples_per_period,
        samples_per_bin: samples_per_period / n_bins,
    })
}

/// Mean value per phase bin after folding `series` modulo `period`, and the
/// mean sample time of each bin within the first period.
pub fn folded_means(series: &IntensitySeries, period: f64, n_bins: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let grid = &series.grid;
    let fold = fold_layout(grid, period, n_bins)?;
    let mut sums = vec![0.0; n_bins];
    for (n, v) in series.values.iter().enumerate() {
        sums[(n % fold.samples_per_period) / fold.samples_per_bin] += v;
    }
    let per_bin = (grid.n_samples / n_bins) as f64;
    let means = sums.into_iter().map(|s| s / per_bin).collect();
    let half = (fold.samples_per_bin - 1) as f64 / 2.0;
    let times = (0..n_bins)
        .map(|b| grid.origin + (b * fold.samples_per_bin) as f64 * grid.dt() + half * grid.dt())
        .collect();
    Ok((means, times))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountingParams {
    /// Count rate at intensity 1, counts per second.
    pub rate: f64,
    /// Total measuring time, seconds, split evenly between the branches.
    pub total_time: f64,
    pub n_bins: usize,
    /// Folding period in seconds; the whole grid when absent.
    #[serde(default)]
    pub fold_period: Option<f64>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldedHistogram {
    pub n_bins: usize,
    pub period: f64,
    pub counts_plus: Vec<u64>,
    pub counts_minus: Vec<u64>,
    pub live_time_per_branch: f64,
    pub rate: f64,
    pub bin_times: Vec<f64>,
}

impl FoldedHistogram {
    pub fn live_time_per_bin(&self) -> f64 {
        self.live_time_per_branch / self.n_bins as f64
    }

    pub fn total_counts(&self) -> u64 {
        self.counts_plus.iter().chain(&self.counts_minus).sum()
    }
}

fn draw(rng: &mut ChaCha8Rng, mean: f64) -> Result<u64> {
    if !(mean >= 0.0) {
        return Err(Error::Config(format!("expected count {mean} is negative or NaN")));
    }
    if mean == 0.0 {
        return Ok(0);
    }
    if mean > MAX_EXPECTED_COUNTS {
        return Err(Error::Config(format!(
            "expected count {mean:e} per bin exceeds the supported range"
        )));
    }
    let poisson = Poisson::new(mean).map_err(|e| Error::Config(format!("poisson mean {mean}: {e}")))?;
    Ok(poisson.sample(rng) as u64)
}

/// Draws folded Poisson counts for both branches.
///
/// Each branch gets half of `total_time`. Draws are taken in (branch, bin)
/// order from a single stream seeded by `params.seed`.
pub fn simulate_counts(
    plus: &IntensitySeries,
    minus: &IntensitySeries,
    params: &CountingParams,
) -> Result<FoldedHistogram> {
    if !(params.rate >= 0.0 && params.rate.is_finite()) {
        return Err(Error::Config(format!("count rate {} must be finite and non-negative", params.rate)));
    }
    if !(params.total_time > 0.0 && params.total_time.is_finite()) {
        return Err(Error::Config(format!("measuring time {} must be positive", params.total_time)));
    }
    if plus.grid != minus.grid {
        return Err(Error::InvalidArgument("branch series on different grids".into()));
    }
    let period = params.fold_period.unwrap_or_else(|| plus.grid.duration());
    let (mean_plus, bin_times) = folded_means(plus, period, params.n_bins)?;
    let (mean_minus, _) = folded_means(minus, period, params.n_bins)?;

    let live = params.total_time / 2.0;
    let exposure = params.rate * live / params.n_bins as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut counts = |means: &[f64]| -> Result<Vec<u64>> {
        means
            .iter()
            .map(|&m| draw(&mut rng, exposure * m.max(0.0)))
            .collect()
    };
    let counts_plus = counts(&mean_plus)?;
    let counts_minus = counts(&mean_minus)?;
    Ok(FoldedHistogram {
        n_bins: params.n_bins,
        period,
        counts_plus,
        counts_minus,
        live_time_per_branch: live,
        rate: params.rate,
        bin_times,
    })
}

/// Count-rate difference between the branches per bin.
#[derive(Clone, Debug, PartialEq)]
pub struct DeltaHistogram {
    pub values: Vec<f64>,
    pub sigmas: Vec<f64>,
}

impl DeltaHistogram {
    /// Divides out the count rate so values compare with the ΔI series.
    pub fn in_intensity_units(&self, rate: f64) -> DeltaHistogram {
        DeltaHistogram {
            values: self.values.iter().map(|v| v / rate).collect(),
            sigmas: self.sigmas.iter().map(|s| s / rate).collect(),
        }
    }
}

/// `(n⁺ - n⁻)/τ` per bin with Poisson sigma `sqrt(n⁺ + n⁻)/τ`, where `τ`
/// is the live time per bin.
pub fn delta_histogram(hist: &FoldedHistogram) -> Result<DeltaHistogram> {
    let tau = hist.live_time_per_bin();
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument("histogram has no live time".into()));
    }
    if hist.counts_plus.len() != hist.counts_minus.len() {
        return Err(Error::InvalidArgument("branch histograms differ in length".into()));
    }
    let (values, sigmas) = hist
        .counts_plus
        .iter()
        .zip(&hist.counts_minus)
        .map(|(&p, &m)| ((p as f64 - m as f64) / tau, ((p + m) as f64).sqrt() / tau))
        .unzip();
    Ok(DeltaHistogram { values, sigmas })
}
