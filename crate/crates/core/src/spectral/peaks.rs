use serde::{Deserialize, Serialize};

use super::PowerSpectrum;

/// A peak counts as sharp when it exceeds the median of its surroundings by
/// this factor.
const SHARPNESS: f64 = 10.0;
/// Half-width, in bins, of the surroundings used for the sharpness test.
const SHARPNESS_HALF_WIDTH: usize = 16;

/// How a peak is accounted for after filtering. Indices refer to positions
/// in [`PeakSet::peaks`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum PeakRole {
    /// Not yet examined by a filter.
    Candidate,
    Base,
    /// `freq ≈ multiple * freq(base)`.
    Harmonic { base: usize, multiple: i64 },
    /// `freq ≈ coeffs[0] * freq(bases[0]) + coeffs[1] * freq(bases[1])`.
    Combination { bases: [usize; 2], coeffs: [i64; 2] },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub freq: f64,
    pub power: f64,
    pub bin: usize,
    #[serde(flatten)]
    pub role: PeakRole,
}

/// Peaks sorted by power, strongest first, with their filtering roles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakSet {
    pub peaks: Vec<Peak>,
    /// Frequency tolerance used by the last filter (0 before filtering).
    pub tolerance: f64,
}

impl PeakSet {
    /// Builds a set from `(freq, power)` pairs, sorting by power.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> PeakSet {
        let mut peaks: Vec<Peak> = pairs
            .iter()
            .map(|&(freq, power)| Peak {
                freq,
                power,
                bin: 0,
                role: PeakRole::Candidate,
            })
            .collect();
        sort_peaks(&mut peaks);
        PeakSet {
            peaks,
            tolerance: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.peaks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    pub fn bases(&self) -> impl Iterator<Item = &Peak> + '_ {
        self.peaks.iter().filter(|p| p.role == PeakRole::Base)
    }

    pub fn base_frequencies(&self) -> Vec<f64> {
        self.bases().map(|p| p.freq).collect()
    }

    /// Frequency implied by a peak's explanation, if it has one.
    pub fn explained_frequency(&self, i: usize) -> Option<f64> {
        match self.peaks[i].role {
            PeakRole::Harmonic { base, multiple } => Some(multiple as f64 * self.peaks[base].freq),
            PeakRole::Combination { bases, coeffs } => Some(
                coeffs[0] as f64 * self.peaks[bases[0]].freq
                    + coeffs[1] as f64 * self.peaks[bases[1]].freq,
            ),
            _ => None,
        }
    }

    fn is_open(&self, i: usize) -> bool {
        matches!(self.peaks[i].role, PeakRole::Candidate | PeakRole::Base)
    }
}

fn sort_peaks(peaks: &mut [Peak]) {
    peaks.sort_by(|a, b| b.power.total_cmp(&a.power).then(a.freq.total_cmp(&b.freq)));
}

/// Local maxima (strictly above both neighbors) with power at least
/// `min_power`, strongest first. The DC bin is never a peak; the Nyquist bin
/// only needs to exceed its left neighbor.
pub fn find_peaks(spec: &PowerSpectrum, min_power: f64) -> PeakSet {
    let p = &spec.power;
    let mut peaks = Vec::new();
    for k in 1..p.len() {
        let left = p[k] > p[k - 1];
        let right = k + 1 == p.len() || p[k] > p[k + 1];
        if left && right && p[k] >= min_power {
            peaks.push(Peak {
                freq: spec.freqs[k],
                power: p[k],
                bin: k,
                role: PeakRole::Candidate,
            });
        }
    }
    sort_peaks(&mut peaks);
    PeakSet {
        peaks,
        tolerance: 0.0,
    }
}

/// Greedy harmonic removal: in power order, an open peak within `tol` of an
/// integer multiple `m >= 2` of an accepted base is marked as a harmonic,
/// otherwise it becomes a base. Peaks explained by an earlier filter keep
/// their explanation.
pub fn filter_harmonics(set: &PeakSet, tol: f64) -> PeakSet {
    let mut out = set.clone();
    out.tolerance = tol;
    let mut accepted: Vec<usize> = Vec::new();
    for i in 0..out.peaks.len() {
        if !out.is_open(i) {
            continue;
        }
        let f = out.peaks[i].freq;
        let mut best: Option<(i64, f64, usize)> = None;
        for &b in &accepted {
            let fb = out.peaks[b].freq;
            let m = (f / fb).round() as i64;
            let err = (f - m as f64 * fb).abs();
            if m >= 2 && err <= tol && best.is_none_or(|(bm, be, _)| (m, err) < (bm, be)) {
                best = Some((m, err, b));
            }
        }
        out.peaks[i].role = match best {
            Some((multiple, _, base)) => PeakRole::Harmonic { base, multiple },
            None => {
                accepted.push(i);
                PeakRole::Base
            }
        };
    }
    out
}

/// Greedy linear-combination removal: in power order, an open peak within
/// `tol` of `m * f_a` (`1 <= m <= max_coeff`) or `m1 * f_a + m2 * f_b`
/// (`|m_i| <= max_coeff`, nonzero, positive result) over accepted bases is
/// explained; otherwise it becomes a base. Simplest explanations (smallest
/// total coefficient magnitude, then smallest error) win.
pub fn filter_linear_combinations(set: &PeakSet, tol: f64, max_coeff: i64) -> PeakSet {
    let mut out = set.clone();
    out.tolerance = tol;
    let mut accepted: Vec<usize> = Vec::new();
    for i in 0..out.peaks.len() {
        if !out.is_open(i) {
            continue;
        }
        let f = out.peaks[i].freq;
        // (total |m|, error, role)
        let mut best: Option<(i64, f64, PeakRole)> = None;
        let mut consider = |cost: i64, value: f64, role: PeakRole| {
            let err = (f - value).abs();
            if value > 0.0 && err <= tol && best.is_none_or(|(c, e, _)| (cost, err) < (c, e)) {
                best = Some((cost, err, role));
            }
        };
        for (ia, &a) in accepted.iter().enumerate() {
            let fa = out.peaks[a].freq;
            for m in 1..=max_coeff {
                consider(m, m as f64 * fa, PeakRole::Harmonic { base: a, multiple: m });
            }
            for &b in &accepted[ia + 1..] {
                let fb = out.peaks[b].freq;
                for m1 in -max_coeff..=max_coeff {
                    for m2 in -max_coeff..=max_coeff {
                        if m1 == 0 || m2 == 0 {
                            continue;
                        }
                        consider(
                            m1.abs() + m2.abs(),
                            m1 as f64 * fa + m2 as f64 * fb,
                            PeakRole::Combination {
                                bases: [a, b],
                                coeffs: [m1, m2],
                            },
                        );
                    }
                }
            }
        }
        out.peaks[i].role = match best {
            Some((_, _, role)) => role,
            None => {
                accepted.push(i);
                PeakRole::Base
            }
        };
    }
    out
}

/// Share of non-DC power lying outside the neighborhoods of sharp peaks.
///
/// A sharp peak is a local maximum at least ten times the median power of
/// the surrounding ±16 bins; its neighborhood is every bin within `tol`
/// (at least one bin). Returns 0 for a spectrum without non-DC power.
pub fn outside_peak_fraction(spec: &PowerSpectrum, tol: f64) -> f64 {
    let p = &spec.power;
    let n = p.len();
    let total: f64 = p[1..].iter().sum();
    if !(total > 0.0) {
        return 0.0;
    }
    let half = ((tol / spec.resolution()).round() as usize).max(1);
    let mut covered = vec![false; n];
    let mut window = Vec::with_capacity(2 * SHARPNESS_HALF_WIDTH + 1);
    for k in 1..n {
        let right = k + 1 == n || p[k] > p[k + 1];
        if !(p[k] > p[k - 1] && right) {
            continue;
        }
        window.clear();
        let lo = k.saturating_sub(SHARPNESS_HALF_WIDTH).max(1);
        let hi = (k + SHARPNESS_HALF_WIDTH).min(n - 1);
        window.extend_from_slice(&p[lo..=hi]);
        window.sort_by(f64::total_cmp);
        let median = window[window.len() / 2];
        if p[k] >= SHARPNESS * median {
            for c in &mut covered[k.saturating_sub(half).max(1)..=(k + half).min(n - 1)] {
                *c = true;
            }
        }
    }
    let outside: f64 = (1..n).filter(|&k| !covered[k]).map(|k| p[k]).sum();
    outside / total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_series_reduces_to_base() {
        let set = PeakSet::from_pairs(&[
            (0.144, 1.0),
            (0.432, 0.5),
            (0.720, 0.3),
            (0.856, 0.2),
            (1.008, 0.1),
        ]);
        let out = filter_harmonics(&set, 0.01);
        assert_eq!(out.base_frequencies(), vec![0.144]);
        let multiples: Vec<i64> = out
            .peaks
            .iter()
            .filter_map(|p| match p.role {
                PeakRole::Harmonic { multiple, .. } => Some(multiple),
                _ => None,
            })
            .collect();
        assert_eq!(multiples, vec![3, 5, 6, 7]);
    }

    #[test]
    fn non_multiples_are_both_bases() {
        let set = PeakSet::from_pairs(&[(0.1, 1.0), (0.25, 0.5)]);
        assert_eq!(filter_harmonics(&set, 0.01).bases().count(), 2);
        let one = PeakSet::from_pairs(&[(0.3, 1.0)]);
        assert_eq!(filter_harmonics(&one, 0.01).base_frequencies(), vec![0.3]);
    }

    #[test]
    fn two_base_combinations() {
        let set = PeakSet::from_pairs(&[(0.4125, 1.0), (1.0125, 0.8), (1.425, 0.5), (2.4, 0.3)]);
        let out = filter_linear_combinations(&set, 0.02, 5);
        assert_eq!(out.base_frequencies(), vec![0.4125, 1.0125]);
        for i in 2..4 {
            let f = out.explained_frequency(i).unwrap();
            assert!((f - out.peaks[i].freq).abs() <= 0.02);
        }
    }

    #[test]
    fn filters_are_idempotent() {
        let set = PeakSet::from_pairs(&[(0.06, 1.0), (0.097, 0.9), (0.157, 0.4), (0.12, 0.3), (0.5, 0.2)]);
        let h = filter_harmonics(&set, 0.001);
        assert_eq!(filter_harmonics(&h, 0.001), h);
        let c = filter_linear_combinations(&h, 0.001, 5);
        assert_eq!(filter_linear_combinations(&c, 0.001, 5), c);
        assert_eq!(c.bases().count(), 3);
    }

    #[test]
    fn roles_serialize_with_explanations() {
        let set = PeakSet::from_pairs(&[(0.1, 1.0), (0.2, 0.5)]);
        let json = serde_json::to_value(filter_harmonics(&set, 0.01)).unwrap();
        assert_eq!(json["peaks"][1]["role"], "harmonic");
        assert_eq!(json["peaks"][1]["multiple"], 2);
        assert_eq!(json["peaks"][0]["role"], "base");
    }
}
