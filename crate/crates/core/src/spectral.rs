//! Spectral analysis of the branch difference.
//!
//! The signal is mean-subtracted, Hanning-windowed and zero-padded before a
//! radix-2 transform. Magnitudes are scaled so that a unit-amplitude cosine
//! reads 1 at its peak, which makes peak heights directly comparable with
//! fitted sine amplitudes.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_PAD_FACTOR: usize = 8;
pub const DEFAULT_HALF_WINDOW_HZ: f64 = 500.0;

/// Symmetric Hanning window, `0.5 (1 - cos(2πn/(N-1)))`.
pub fn hanning(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    let denom = (n - 1) as f64;
    (0..n)
        .map(|k| 0.5 * (1.0 - (2.0 * PI * k as f64 / denom).cos()))
        .collect()
}

/// A windowed, zero-padded signal ready for the transform.
#[derive(Clone, Debug, PartialEq)]
pub struct PreparedSignal {
    pub data: Vec<f64>,
    pub n_input: usize,
    pub pad_factor: usize,
    pub window_sum: f64,
}

pub fn preprocess(values: &[f64], pad_factor: usize) -> Result<PreparedSignal> {
    if values.len() < 8 {
        return Err(Error::InvalidArgument(format!(
            "need at least 8 samples for a spectrum, got {}",
            values.len()
        )));
    }
    if pad_factor == 0 {
        return Err(Error::InvalidArgument("pad factor must be at least 1".into()));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let window = hanning(n);
    let len = pad_factor * n.next_power_of_two();
    let mut data = vec![0.0; len];
    for (slot, (v, w)) in data.iter_mut().zip(values.iter().zip(&window)) {
        *slot = (v - mean) * w;
    }
    Ok(PreparedSignal {
        data,
        n_input: n,
        pad_factor,
        window_sum: window.iter().sum(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MagnitudeSpectrum {
    pub freq_bins: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub window: String,
    pub pad_factor: usize,
    pub n_input: usize,
    /// Factor applied to the raw transform modulus.
    pub calibration: f64,
}

impl MagnitudeSpectrum {
    pub fn bin_width(&self) -> f64 {
        self.freq_bins.get(1).copied().unwrap_or(0.0) - self.freq_bins[0]
    }

    /// Squared magnitudes, for plots that want power.
    pub fn power(&self) -> Vec<f64> {
        self.magnitudes.iter().map(|m| m * m).collect()
    }
}

pub(crate) fn transform(data: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = data.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// One-sided calibrated magnitude spectrum from DC to Nyquist.
pub fn magnitude_spectrum(prepared: &PreparedSignal, sample_rate: f64) -> Result<MagnitudeSpectrum> {
    let len = prepared.data.len();
    if !len.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("transform length {len} is not a power of two")));
    }
    let calibration = 2.0 / prepared.window_sum;
    let spectrum = transform(&prepared.data);
    let half = len / 2;
    let df = sample_rate / len as f64;
    Ok(MagnitudeSpectrum {
        freq_bins: (0..=half).map(|k| k as f64 * df).collect(),
        magnitudes: spectrum[..=half].iter().map(|z| z.norm() * calibration).collect(),
        window: "hanning".into(),
        pad_factor: prepared.pad_factor,
        n_input: prepared.n_input,
        calibration,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub target: f64,
    pub located: f64,
    pub height: f64,
    pub height_normalized: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakReport {
    pub peaks: Vec<Peak>,
}

impl PeakReport {
    pub fn heights(&self) -> Vec<f64> {
        self.peaks.iter().map(|p| p.height).collect()
    }

    pub fn normalized(&self) -> Vec<f64> {
        self.peaks.iter().map(|p| p.height_normalized).collect()
    }

    pub fn max_height(&self) -> f64 {
        self.peaks.iter().map(|p| p.height).fold(0.0, f64::max)
    }

    pub fn at(&self, target: f64) -> Option<&Peak> {
        self.peaks.iter().find(|p| p.target == target)
    }
}

/// Largest magnitude within `±half_window` of each target, refined by a
/// parabola through the three bins around the maximum.
pub fn peak_heights(spec: &MagnitudeSpectrum, targets: &[f64], half_window: f64) -> Result<PeakReport> {
    let df = spec.bin_width();
    if half_window < 2.0 * df {
        return Err(Error::InvalidArgument(format!(
            "search half-window {half_window} Hz is narrower than two bins ({df} Hz each)"
        )));
    }
    let nyquist = *spec.freq_bins.last().unwrap_or(&0.0);
    let mut peaks = Vec::with_capacity(targets.len());
    for &target in targets {
        if !(0.0..=nyquist).contains(&target) {
            return Err(Error::InvalidArgument(format!("target {target} Hz outside 0..{nyquist} Hz")));
        }
        let best = spec
            .freq_bins
            .iter()
            .enumerate()
            .filter(|(_, &f)| (f - target).abs() <= half_window)
            .max_by(|a, b| spec.magnitudes[a.0].total_cmp(&spec.magnitudes[b.0]))
            .map(|(k, _)| k)
            .ok_or_else(|| Error::InvalidArgument(format!("no bins within {half_window} Hz of {target} Hz")))?;

        let y0 = spec.magnitudes[best];
        let (mut located, mut height) = (spec.freq_bins[best], y0);
        if best > 0 && best + 1 < spec.magnitudes.len() {
            let (ym, yp) = (spec.magnitudes[best - 1], spec.magnitudes[best + 1]);
            let curvature = ym - 2.0 * y0 + yp;
            if curvature < 0.0 {
                let delta = 0.5 * (ym - yp) / curvature;
                located += delta * df;
                height = y0 - 0.25 * (ym - yp) * delta;
            }
        }
        peaks.push(Peak {
            target,
            located,
            height,
            height_normalized: 0.0,
        });
    }
    let top = peaks.iter().map(|p| p.height).fold(0.0, f64::max);
    if top > 0.0 {
        for p in &mut peaks {
            p.height_normalized = p.height / top;
        }
    }
    Ok(PeakReport { peaks })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SineComponent {
    pub freq: f64,
    pub amplitude: f64,
    /// Phase of `amplitude * cos(2π f t + phase)`, in (-π, π].
    pub phase: f64,
    pub amplitude_se: f64,
    pub phase_se: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SineFitResult {
    pub offset: f64,
    pub components: Vec<SineComponent>,
    pub residual_rms: f64,
    /// Standard errors of the linear parameters, ordered
    /// `[offset, a_1, b_1, a_2, b_2, ...]`.
    pub standard_errors: Vec<f64>,
}

impl SineFitResult {
    pub fn amplitudes(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.amplitude).collect()
    }
}

fn fold_phase(phase: f64) -> f64 {
    if phase <= -PI {
        phase + 2.0 * PI
    } else {
        phase
    }
}

/// Weighted linear least squares on `{1} ∪ {cos 2πft, sin 2πft}` for the
/// given frequencies.
pub fn fit_sines(values: &[f64], sigmas: Option<&[f64]>, times: &[f64], freqs: &[f64]) -> Result<SineFitResult> {
    let n = values.len();
    let p = 1 + 2 * freqs.len();
    if times.len() != n {
        return Err(Error::InvalidArgument(format!("{} times for {n} values", times.len())));
    }
    if p > n {
        return Err(Error::InvalidArgument(format!("{p} parameters for {n} samples")));
    }
    for (k, f) in freqs.iter().enumerate() {
        if freqs[..k].contains(f) {
            return Err(Error::InvalidArgument(format!("frequency {f} Hz listed twice")));
        }
    }
    let weights: Vec<f64> = match sigmas {
        Some(s) => {
            if s.len() != n {
                return Err(Error::InvalidArgument(format!("{} sigmas for {n} values", s.len())));
            }
            s.iter()
                .map(|&x| {
                    if x > 0.0 && x.is_finite() {
                        Ok(1.0 / x)
                    } else {
                        Err(Error::InvalidArgument(format!("sigma {x} must be positive")))
                    }
                })
                .collect::<Result<_>>()?
        }
        None => vec![1.0; n],
    };

    let basis = |t: f64, col: usize| -> f64 {
        if col == 0 {
            return 1.0;
        }
        let arg = 2.0 * PI * freqs[(col - 1) / 2] * t;
        if col % 2 == 1 {
            arg.cos()
        } else {
            arg.sin()
        }
    };
    let design = DMatrix::from_fn(n, p, |r, c| weights[r] * basis(times[r], c));
    let rhs = DVector::from_iterator(n, values.iter().zip(&weights).map(|(v, w)| v * w));

    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > 1e-10 * smax) {
        return Err(Error::SingularFit(format!(
            "design matrix is rank deficient (singular values {smin:e} / {smax:e}); frequencies alias on these times"
        )));
    }
    let params = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::SingularFit(e.to_string()))?;
    let normal = design.transpose() * &design;
    let cov = normal
        .try_inverse()
        .ok_or_else(|| Error::SingularFit("normal equations not invertible".into()))?;

    let components = freqs
        .iter()
        .enumerate()
        .map(|(k, &freq)| {
            let (ia, ib) = (1 + 2 * k, 2 + 2 * k);
            let (a, b) = (params[ia], params[ib]);
            let (va, vb, cab) = (cov[(ia, ia)], cov[(ib, ib)], cov[(ia, ib)]);
            let amp2 = a * a + b * b;
            let amplitude = amp2.sqrt();
            let (amplitude_se, phase_se) = if amp2 > 0.0 {
                (
                    ((a * a * va + b * b * vb + 2.0 * a * b * cab) / amp2).max(0.0).sqrt(),
                    ((b * b * va + a * a * vb - 2.0 * a * b * cab) / (amp2 * amp2)).max(0.0).sqrt(),
                )
            } else {
                (((va + vb) / 2.0).sqrt(), PI)
            };
            SineComponent {
                freq,
                amplitude,
                phase: if amplitude > 0.0 { fold_phase((-b).atan2(a)) } else { 0.0 },
                amplitude_se,
                phase_se,
            }
        })
        .collect();

    let residual_ss: f64 = (0..n)
        .map(|r| {
            let model: f64 = (0..p).map(|c| params[c] * basis(times[r], c)).sum();
            (values[r] - model).powi(2)
        })
        .sum();
    Ok(SineFitResult {
        offset: params[0],
        components,
        residual_rms: (residual_ss / n as f64).sqrt(),
        standard_errors: (0..p).map(|c| cov[(c, c)].max(0.0).sqrt()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cosine(n: usize, rate: f64, f: f64, amp: f64, phase: f64) -> Vec<f64> {
        (0..n)
            .map(|k| amp * (2.0 * PI * f * k as f64 / rate + phase).cos())
            .collect()
    }

    fn naive_dft(x: &[f64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(j, &v)| v * Complex64::from_polar(1.0, -2.0 * PI * (j * k) as f64 / n as f64))
                    .sum()
            })
            .collect()
    }

    #[test]
    fn preprocess_shapes() {
        let flat = preprocess(&[3.0; 16], 1).unwrap();
        assert!(flat.data.iter().all(|&x| x.abs() < 1e-15));
        assert_eq!(preprocess(&[0.0; 8], 1).unwrap().data.len(), 8);
        assert_eq!(preprocess(&[0.0; 100], 8).unwrap().data.len(), 1024);
        assert!(preprocess(&[0.0; 7], 1).is_err());
        assert!(preprocess(&[0.0; 8], 0).is_err());
    }

    #[test]
    fn hanning_endpoints() {
        let w = hanning(9);
        assert!(w[0].abs() < 1e-15 && w[8].abs() < 1e-15);
        assert!((w[4] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fft_matches_direct_sum() {
        let x: Vec<f64> = (0..64).map(|k| ((k * 7919) % 31) as f64 - 15.0).collect();
        let fast = transform(&x);
        let slow = naive_dft(&x);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn parseval_before_calibration() {
        let x = cosine(300, 64_000.0, 6_123.0, 0.7, 0.2);
        let noise: Vec<f64> = x.iter().enumerate().map(|(k, v)| v + ((k * 37) % 11) as f64 * 0.01).collect();
        let prep = preprocess(&noise, 4).unwrap();
        let time_energy: f64 = prep.data.iter().map(|v| v * v).sum();
        let freq_energy: f64 = transform(&prep.data).iter().map(|z| z.norm_sqr()).sum::<f64>() / prep.data.len() as f64;
        assert!(((freq_energy - time_energy) / time_energy).abs() < 1e-9);
    }

    #[test]
    fn calibration_from_a_known_cosine() {
        // measure the raw peak of a unit cosine on an exact bin, then compare
        // against the stored factor
        let n = 256;
        let rate = 64_000.0;
        let f = 40.0 * rate / n as f64;
        let prep = preprocess(&cosine(n, rate, f, 1.0, 0.0), 1).unwrap();
        let raw = transform(&prep.data);
        let raw_peak = raw[40].norm();
        let spec = magnitude_spectrum(&prep, rate).unwrap();
        assert!((spec.calibration * raw_peak - 1.0).abs() < 2e-3);
    }

    #[test]
    fn zero_signal_zero_spectrum() {
        let spec = magnitude_spectrum(&preprocess(&[0.0; 64], 8).unwrap(), 1000.0).unwrap();
        assert!(spec.magnitudes.iter().all(|&m| m == 0.0));
        assert_eq!(spec.freq_bins.len(), 64 * 8 / 2 + 1);
    }

    #[test]
    fn unit_cosine_reads_one_anywhere_in_band() {
        let rate = 64_000.0;
        for n in [300, 512, 1000] {
            for pad in [8, 16] {
                for f in [2_100.0, 6_000.0, 9_437.5, 15_003.0, 27_777.0] {
                    let prep = preprocess(&cosine(n, rate, f, 1.0, 0.4), pad).unwrap();
                    let spec = magnitude_spectrum(&prep, rate).unwrap();
                    let peak = peak_heights(&spec, &[f], 500.0).unwrap();
                    let h = peak.peaks[0].height;
                    assert!((h - 1.0).abs() < 5e-3, "n={n} pad={pad} f={f}: {h}");
                }
            }
        }
    }

    #[test]
    fn amplitude_scaled_peak() {
        let rate = 64_000.0;
        let prep = preprocess(&cosine(512, rate, 6_000.0, 0.06512, 0.0), 8).unwrap();
        let spec = magnitude_spectrum(&prep, rate).unwrap();
        let h = peak_heights(&spec, &[6_000.0], 500.0).unwrap().peaks[0].height;
        assert!((h / 0.06512 - 1.0).abs() < 5e-3);
    }

    #[test]
    fn peak_ratio_is_linear() {
        let rate = 64_000.0;
        let a = cosine(512, rate, 4_000.0, 1.0, 0.0);
        let b = cosine(512, rate, 11_000.0, 2.0, 1.0);
        let x: Vec<f64> = a.iter().zip(&b).map(|(p, q)| p + q).collect();
        let spec = magnitude_spectrum(&preprocess(&x, 8).unwrap(), rate).unwrap();
        let rep = peak_heights(&spec, &[4_000.0, 11_000.0], 500.0).unwrap();
        assert!((rep.peaks[1].height / rep.peaks[0].height - 2.0).abs() < 0.02);
        assert_eq!(rep.peaks[1].height_normalized, 1.0);
    }

    #[test]
    fn peak_window_checks() {
        let spec = magnitude_spectrum(&preprocess(&[0.0; 64], 1).unwrap(), 64_000.0).unwrap();
        assert!(peak_heights(&spec, &[3_000.0], 500.0).is_err());
        assert!(peak_heights(&spec, &[40_000.0], 5_000.0).is_err());
    }

    #[test]
    fn fit_recovers_amplitudes_and_phases() {
        let rate = 64_000.0;
        let n = 512;
        let times: Vec<f64> = (0..n).map(|k| k as f64 / rate).collect();
        let truth = [(3_000.0, 0.06512, 0.3), (6_000.0, 0.1, -2.0), (12_000.0, 0.13024, PI)];
        let values: Vec<f64> = times
            .iter()
            .map(|&t| 0.25 + truth.iter().map(|&(f, a, ph)| a * (2.0 * PI * f * t + ph).cos()).sum::<f64>())
            .collect();
        let freqs: Vec<f64> = truth.iter().map(|x| x.0).collect();
        let fit = fit_sines(&values, None, &times, &freqs).unwrap();
        assert!((fit.offset - 0.25).abs() < 1e-12);
        for (c, &(_, a, ph)) in fit.components.iter().zip(&truth) {
            assert!((c.amplitude / a - 1.0).abs() < 1e-9);
            assert!((c.phase - ph).abs() < 1e-9);
        }
        assert!(fit.residual_rms < 1e-12);
    }

    #[test]
    fn fit_of_zero_is_zero() {
        let times: Vec<f64> = (0..64).map(|k| k as f64 * 1e-5).collect();
        let fit = fit_sines(&[0.0; 64], None, &times, &[3_000.0, 6_000.0]).unwrap();
        assert!(fit.amplitudes().iter().all(|&a| a == 0.0));
    }

    #[test]
    fn aliased_frequencies_are_singular() {
        let rate = 10_000.0;
        let times: Vec<f64> = (0..100).map(|k| k as f64 / rate).collect();
        let values = vec![1.0; 100];
        let err = fit_sines(&values, None, &times, &[1_000.0, 11_000.0]).unwrap_err();
        assert!(matches!(err, Error::SingularFit(_)));
        assert!(fit_sines(&values, None, &times[..4], &[1_000.0, 2_000.0]).is_err());
    }

    #[test]
    fn weighted_fit_standard_errors() {
        // constant sigma: SE of a and b are sigma * sqrt(2/N)
        let n = 400;
        let times: Vec<f64> = (0..n).map(|k| k as f64 / 40_000.0).collect();
        let values = cosine(n, 40_000.0, 5_000.0, 1.0, 0.0);
        let sig = vec![0.1; n];
        let fit = fit_sines(&values, Some(&sig), &times, &[5_000.0]).unwrap();
        let want = 0.1 * (2.0 / n as f64).sqrt();
        assert!((fit.standard_errors[1] - want).abs() < 1e-9);
        assert!((fit.components[0].amplitude_se - want).abs() < 1e-9);
        assert!(fit_sines(&values, Some(&vec![0.0; n]), &times, &[5_000.0]).is_err());
    }
}
