//! Variable-averaged Fourier power spectra and frequency analysis.
//!
//! Each coordinate of a trajectory is transformed separately; the one-sided
//! power spectra are averaged over coordinates and normalized so that the
//! largest non-DC bin equals one. Peaks are then reduced to base frequencies
//! by removing harmonics and integer linear combinations.

mod peaks;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dynsys::Trajectory;
use crate::error::{Error, Result};

pub use peaks::{
    filter_harmonics, filter_linear_combinations, find_peaks, outside_peak_fraction, Peak,
    PeakRole, PeakSet,
};

/// Shortest series accepted by [`power_spectrum`].
pub const MIN_SAMPLES: usize = 16;
pub const DEFAULT_MIN_POWER: f64 = 0.01;
pub const DEFAULT_TOL_BINS: f64 = 2.0;
pub const DEFAULT_MAX_COEFF: i64 = 5;
pub const DEFAULT_BROADBAND_FRACTION: f64 = 0.5;

/// Variables transformed per parallel batch. Batches are reduced in index
/// order so the average does not depend on the thread count.
const CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    None,
    Hann,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumOptions {
    /// Remove each variable's mean before transforming.
    pub detrend: bool,
    pub window: Window,
    /// Duration of one map step (the RK4 step for ODE oracles, else 1).
    /// Frequencies are reported in cycles per this unit.
    pub time_per_step: f64,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        SpectrumOptions {
            detrend: true,
            window: Window::None,
            time_per_step: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSpectrum {
    pub freqs: Vec<f64>,
    /// Averaged power divided by `scale`, so the largest non-DC entry is 1.
    pub power: Vec<f64>,
    /// Divisor applied to the averaged power (1 when all non-DC power is 0).
    pub scale: f64,
    pub n_samples: usize,
    pub detrended: bool,
    pub window: Window,
}

impl PowerSpectrum {
    /// Width of one frequency bin.
    pub fn resolution(&self) -> f64 {
        self.freqs[1] - self.freqs[0]
    }

    pub fn nyquist(&self) -> f64 {
        *self.freqs.last().unwrap()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "freq,power")?;
        for (f, p) in self.freqs.iter().zip(&self.power) {
            writeln!(w, "{f},{p}")?;
        }
        Ok(())
    }
}

/// One-sided power of a single series, before any normalization. The sum of
/// the result equals the energy `Σ x_t²` of the (detrended, windowed) series.
pub fn variable_power(series: &[f64], detrend: bool, window: Window) -> Vec<f64> {
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(series.len());
    let mut buf = Vec::new();
    let mut out = vec![0.0; series.len() / 2 + 1];
    accumulate_power(series, detrend, window, fft.as_ref(), &mut buf, &mut out);
    out
}

fn accumulate_power(
    series: &[f64],
    detrend: bool,
    window: Window,
    fft: &dyn rustfft::Fft<f64>,
    buf: &mut Vec<Complex<f64>>,
    acc: &mut [f64],
) {
    let n = series.len();
    let mean = if detrend {
        series.iter().sum::<f64>() / n as f64
    } else {
        0.0
    };
    buf.clear();
    buf.extend(series.iter().enumerate().map(|(t, &x)| {
        let w = match window {
            Window::None => 1.0,
            Window::Hann => {
                0.5 - 0.5 * (2.0 * std::f64::consts::PI * t as f64 / n as f64).cos()
            }
        };
        Complex::new((x - mean) * w, 0.0)
    }));
    fft.process(buf);
    let nf = n as f64;
    for (k, a) in acc.iter_mut().enumerate() {
        let p = buf[k].norm_sqr() / nf;
        let doubled = k != 0 && !(n % 2 == 0 && k == n / 2);
        *a += if doubled { 2.0 * p } else { p };
    }
}

/// Power spectrum averaged over all variables of `traj`.
pub fn power_spectrum(traj: &Trajectory, opts: &SpectrumOptions) -> Result<PowerSpectrum> {
    let n = traj.len();
    if n < MIN_SAMPLES {
        return Err(Error::TooShort {
            required: MIN_SAMPLES,
            found: n,
        });
    }
    if !(opts.time_per_step.is_finite() && opts.time_per_step > 0.0) {
        return Err(Error::invalid("time_per_step must be positive"));
    }
    let bins = n / 2 + 1;
    let dim = traj.dim();
    let fft = FftPlanner::new().plan_fft_forward(n);

    let mut total = vec![0.0; bins];
    let vars: Vec<usize> = (0..dim).collect();
    for batch in vars.chunks(CHUNK * rayon::current_num_threads().max(1)) {
        let partials: Vec<Vec<f64>> = batch
            .par_chunks(CHUNK)
            .map(|chunk| {
                let mut acc = vec![0.0; bins];
                let mut series = Vec::with_capacity(n);
                let mut buf = Vec::with_capacity(n);
                for &j in chunk {
                    series.clear();
                    series.extend(traj.column(j));
                    accumulate_power(&series, opts.detrend, opts.window, fft.as_ref(), &mut buf, &mut acc);
                }
                acc
            })
            .collect();
        for part in partials {
            total.iter_mut().zip(&part).for_each(|(a, b)| *a += b);
        }
    }
    total.iter_mut().for_each(|p| *p /= dim as f64);

    let peak = total[1..].iter().copied().fold(0.0, f64::max);
    let scale = if peak > 0.0 { peak } else { 1.0 };
    let power = total.iter().map(|p| p / scale).collect();
    let spacing = traj.dt() * opts.time_per_step;
    let freqs = (0..bins).map(|k| k as f64 / (n as f64 * spacing)).collect();
    Ok(PowerSpectrum {
        freqs,
        power,
        scale,
        n_samples: n,
        detrended: opts.detrend,
        window: opts.window,
    })
}

/// Verdict of the frequency analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumClass {
    FixedPointLike,
    Periodic,
    QuasiPeriodic(usize),
    BroadbandChaotic,
}

impl fmt::Display for SpectrumClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpectrumClass::FixedPointLike => f.write_str("fixed_point_like"),
            SpectrumClass::Periodic => f.write_str("periodic"),
            SpectrumClass::QuasiPeriodic(k) => write!(f, "quasi_periodic({k})"),
            SpectrumClass::BroadbandChaotic => f.write_str("broadband_chaotic"),
        }
    }
}

impl FromStr for SpectrumClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed_point_like" => Ok(SpectrumClass::FixedPointLike),
            "periodic" => Ok(SpectrumClass::Periodic),
            "broadband_chaotic" => Ok(SpectrumClass::BroadbandChaotic),
            _ => s
                .strip_prefix("quasi_periodic(")
                .and_then(|r| r.strip_suffix(')'))
                .and_then(|k| k.parse().ok())
                .map(SpectrumClass::QuasiPeriodic)
                .ok_or_else(|| Error::invalid(format!("unknown spectrum class `{s}`"))),
        }
    }
}

impl Serialize for SpectrumClass {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SpectrumClass {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// `outside_fraction` is the share of non-DC power away from sharp peaks
/// (see [`outside_peak_fraction`]).
pub fn classify_spectrum(peaks: &PeakSet, outside_fraction: f64, broadband_threshold: f64) -> SpectrumClass {
    if outside_fraction > broadband_threshold {
        return SpectrumClass::BroadbandChaotic;
    }
    match peaks.bases().count() {
        0 => SpectrumClass::FixedPointLike,
        1 => SpectrumClass::Periodic,
        k => SpectrumClass::QuasiPeriodic(k),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub min_power: f64,
    /// Matching tolerance in frequency units; `None` means two bins.
    pub tol: Option<f64>,
    pub max_coeff: i64,
    pub broadband_threshold: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            min_power: DEFAULT_MIN_POWER,
            tol: None,
            max_coeff: DEFAULT_MAX_COEFF,
            broadband_threshold: DEFAULT_BROADBAND_FRACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralAnalysis {
    pub peaks: PeakSet,
    pub outside_fraction: f64,
    pub classification: SpectrumClass,
}

impl SpectralAnalysis {
    pub fn base_frequencies(&self) -> Vec<f64> {
        self.peaks.bases().map(|p| p.freq).collect()
    }
}

/// Peak detection, both filters and classification in one call.
pub fn analyze(spec: &PowerSpectrum, opts: &AnalysisOptions) -> Result<SpectralAnalysis> {
    if !(opts.min_power > 0.0 && opts.min_power <= 1.0) {
        return Err(Error::invalid("min_power must be in (0, 1]"));
    }
    if opts.max_coeff < 1 {
        return Err(Error::invalid("max_coeff must be at least 1"));
    }
    let tol = opts.tol.unwrap_or(DEFAULT_TOL_BINS * spec.resolution());
    let peaks = find_peaks(spec, opts.min_power);
    let peaks = filter_harmonics(&peaks, tol);
    let peaks = filter_linear_combinations(&peaks, tol, opts.max_coeff);
    let outside_fraction = outside_peak_fraction(spec, tol);
    let classification = classify_spectrum(&peaks, outside_fraction, opts.broadband_threshold);
    Ok(SpectralAnalysis {
        peaks,
        outside_fraction,
        classification,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(freqs: &[(f64, f64)], n: usize) -> Trajectory {
        let data = (0..n)
            .map(|t| freqs.iter().map(|(f, a)| a * (2.0 * PI * f * t as f64).sin()).sum())
            .collect();
        Trajectory::from_flat(data, 1, 0, 1.0).unwrap()
    }

    #[test]
    fn single_tone_peak_location() {
        let s = power_spectrum(&tone(&[(0.1, 1.0)], 1000), &SpectrumOptions::default()).unwrap();
        assert_eq!(s.freqs.len(), 501);
        assert_eq!(s.nyquist(), 0.5);
        let (k, _) = s.power.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        assert!((s.freqs[k] - 0.1).abs() <= s.resolution());
        let peaks = find_peaks(&s, 0.01);
        assert_eq!(peaks.peaks.len(), 1);
        let a = analyze(&s, &AnalysisOptions::default()).unwrap();
        assert_eq!(a.classification, SpectrumClass::Periodic);
    }

    #[test]
    fn constant_series_has_no_non_dc_power() {
        let t = Trajectory::from_flat(vec![3.0; 64], 1, 0, 1.0).unwrap();
        let s = power_spectrum(&t, &SpectrumOptions::default()).unwrap();
        assert!(s.power.iter().all(|&p| p == 0.0));
        let a = analyze(&s, &AnalysisOptions::default()).unwrap();
        assert_eq!(a.classification, SpectrumClass::FixedPointLike);
    }

    #[test]
    fn parseval_per_variable() {
        let series: Vec<f64> = (0..257).map(|t| ((t * 7919) % 101) as f64 / 10.0 - 3.0).collect();
        for window in [Window::None, Window::Hann] {
            for &n in &[256usize, 257] {
                let x = &series[..n];
                let p = variable_power(x, false, window);
                let energy: f64 = x
                    .iter()
                    .enumerate()
                    .map(|(t, v)| {
                        let w = match window {
                            Window::None => 1.0,
                            Window::Hann => 0.5 - 0.5 * (2.0 * PI * t as f64 / n as f64).cos(),
                        };
                        (v * w).powi(2)
                    })
                    .sum();
                let total: f64 = p.iter().sum();
                assert!(((total - energy) / energy).abs() < 1e-9, "{total} {energy}");
            }
        }
    }

    #[test]
    fn frequencies_follow_time_per_step() {
        let t = Trajectory::from_flat(vec![0.0; 100], 1, 0, 2.0).unwrap();
        let opts = SpectrumOptions {
            time_per_step: 0.01,
            ..Default::default()
        };
        let s = power_spectrum(&t, &opts).unwrap();
        assert!((s.nyquist() - 25.0).abs() < 1e-12);
    }

    #[test]
    fn too_short_is_an_error() {
        let t = Trajectory::from_flat(vec![0.0; 15], 1, 0, 1.0).unwrap();
        assert!(matches!(
            power_spectrum(&t, &SpectrumOptions::default()),
            Err(Error::TooShort { required: 16, found: 15 })
        ));
    }

    #[test]
    fn averaging_is_independent_of_chunking() {
        let d = 3 * CHUNK + 5;
        let n = 64;
        let data: Vec<f64> = (0..n * d).map(|i| ((i * 31) % 17) as f64).collect();
        let t = Trajectory::from_flat(data, d, 0, 1.0).unwrap();
        let s = power_spectrum(&t, &SpectrumOptions::default()).unwrap();
        let mut naive = vec![0.0; n / 2 + 1];
        for j in 0..d {
            let col: Vec<f64> = t.column(j).collect();
            for (a, b) in naive.iter_mut().zip(variable_power(&col, true, Window::None)) {
                *a += b;
            }
        }
        for (a, b) in s.power.iter().zip(&naive) {
            assert!((a * s.scale - b / d as f64).abs() < 1e-9 * s.scale);
        }
    }

    #[test]
    fn class_strings_round_trip() {
        for c in [
            SpectrumClass::FixedPointLike,
            SpectrumClass::Periodic,
            SpectrumClass::QuasiPeriodic(3),
            SpectrumClass::BroadbandChaotic,
        ] {
            assert_eq!(c.to_string().parse::<SpectrumClass>().unwrap(), c);
        }
    }
}
