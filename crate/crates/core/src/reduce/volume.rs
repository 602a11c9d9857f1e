use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dynsys::{advance_in_place, check_input, DynamicalSystem, StateVector, Trajectory};
use crate::error::{Error, Result};

pub const DEFAULT_WINDOW: usize = 2000;
pub const DEFAULT_TOTAL_STEPS: usize = 60_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendVerdict {
    Dissipative,
    NoClearDownwardTrend,
}

impl fmt::Display for TrendVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrendVerdict::Dissipative => "dissipative",
            TrendVerdict::NoClearDownwardTrend => "no clear downward trend",
        })
    }
}

/// Per-window sums of distances to the window centroid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeReport {
    pub window: usize,
    /// Step at which each window starts.
    pub starts: Vec<usize>,
    pub sums: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation of `sums`.
    pub std: f64,
    /// Least-squares slope of `sums` against window index.
    pub slope: f64,
    pub verdict: TrendVerdict,
}

impl VolumeReport {
    fn from_sums(window: usize, sums: Vec<f64>) -> VolumeReport {
        let n = sums.len() as f64;
        let mean = sums.iter().sum::<f64>() / n;
        let std = (sums.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n).sqrt();
        let xm = (n - 1.0) / 2.0;
        let (mut sxy, mut sxx) = (0.0, 0.0);
        for (i, s) in sums.iter().enumerate() {
            let dx = i as f64 - xm;
            sxy += dx * (s - mean);
            sxx += dx * dx;
        }
        let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        let verdict = if slope < 0.0 && slope.abs() * n > 2.0 * std {
            TrendVerdict::Dissipative
        } else {
            TrendVerdict::NoClearDownwardTrend
        };
        VolumeReport {
            window,
            starts: (0..sums.len()).map(|i| i * window).collect(),
            sums,
            mean,
            std,
            slope,
            verdict,
        }
    }
}

fn check_window(total_steps: usize, window: usize) -> Result<()> {
    if window < 2 {
        return Err(Error::invalid("window must be at least 2"));
    }
    if total_steps == 0 || total_steps % window != 0 {
        return Err(Error::invalid(format!(
            "total_steps ({total_steps}) must be a positive multiple of window ({window})"
        )));
    }
    Ok(())
}

/// Volume proxy over `total_steps` states starting at `x_attr`, split into
/// windows of `window` consecutive states. Memory use is independent of the
/// number of steps: each window is evolved twice, first for its centroid and
/// then for the distances.
pub fn volume_proxy(
    sys: &dyn DynamicalSystem,
    x_attr: &StateVector,
    total_steps: usize,
    window: usize,
) -> Result<VolumeReport> {
    check_input(sys, x_attr)?;
    check_window(total_steps, window)?;
    let dim = sys.dim();
    let mut start = x_attr.as_slice().to_vec();
    let mut x = vec![0.0; dim];
    let mut scratch = vec![0.0; dim];
    let mut sums = Vec::with_capacity(total_steps / window);
    for w in 0..total_steps / window {
        let t0 = w * window;
        let mut centroid = vec![0.0; dim];
        x.copy_from_slice(&start);
        for k in 0..window {
            if k > 0 {
                advance_in_place(sys, &mut x, &mut scratch, 1, t0 + k - 1)?;
            }
            centroid.iter_mut().zip(&x).for_each(|(c, v)| *c += v);
        }
        centroid.iter_mut().for_each(|c| *c /= window as f64);

        x.copy_from_slice(&start);
        let mut sum = 0.0;
        for k in 0..window {
            if k > 0 {
                advance_in_place(sys, &mut x, &mut scratch, 1, t0 + k - 1)?;
            }
            sum += distance(&x, &centroid);
        }
        sums.push(sum);
        // The next window starts one step after this window's last state.
        advance_in_place(sys, &mut x, &mut scratch, 1, t0 + window - 1)?;
        std::mem::swap(&mut start, &mut x);
    }
    Ok(VolumeReport::from_sums(window, sums))
}

/// Volume proxy of recorded states; trailing rows that do not fill a window
/// are ignored.
pub fn volume_proxy_of_trajectory(traj: &Trajectory, window: usize) -> Result<VolumeReport> {
    let n = traj.len() / window.max(1);
    check_window(n * window, window)?;
    let sums = (0..n)
        .map(|w| {
            let rows: Vec<&[f64]> = (w * window..(w + 1) * window).map(|i| traj.row(i)).collect();
            let mut centroid = vec![0.0; traj.dim()];
            for r in &rows {
                centroid.iter_mut().zip(*r).for_each(|(c, v)| *c += v);
            }
            centroid.iter_mut().for_each(|c| *c /= window as f64);
            rows.iter().map(|r| distance(r, &centroid)).sum()
        })
        .collect();
    Ok(VolumeReport::from_sums(window, sums))
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::{evolve, make_oracle, ParamValue, Params};

    #[test]
    fn identity_has_zero_volume() {
        let sys = make_oracle("identity", &Params::new()).unwrap();
        let r = volume_proxy(sys.as_ref(), &sys.default_initial_state(), 100, 10).unwrap();
        assert_eq!(r.sums, vec![0.0; 10]);
        assert_eq!(r.verdict, TrendVerdict::NoClearDownwardTrend);
    }

    #[test]
    fn streaming_matches_recorded_trajectory() {
        let mut p = Params::new();
        p.insert("diag".into(), ParamValue::Vector(vec![0.99, -0.95]));
        let sys = make_oracle("linear_diag", &p).unwrap();
        let x0 = StateVector::new(vec![1.0, 2.0]).unwrap();
        let streamed = volume_proxy(sys.as_ref(), &x0, 60, 20).unwrap();
        let traj = evolve(sys.as_ref(), &x0, 59, 1).unwrap();
        let recorded = volume_proxy_of_trajectory(&traj, 20).unwrap();
        assert_eq!(streamed, recorded);
        assert_eq!(streamed.verdict, TrendVerdict::Dissipative);
        assert!(streamed.slope < 0.0);
    }

    #[test]
    fn slope_of_a_line() {
        let r = VolumeReport::from_sums(5, vec![3.0, 5.0, 7.0, 9.0]);
        assert!((r.slope - 2.0).abs() < 1e-12);
        assert_eq!(r.starts, vec![0, 5, 10, 15]);
    }

    #[test]
    fn window_must_divide_total() {
        let sys = make_oracle("identity", &Params::new()).unwrap();
        assert!(volume_proxy(sys.as_ref(), &sys.default_initial_state(), 100, 30).is_err());
        assert!(volume_proxy(sys.as_ref(), &sys.default_initial_state(), 100, 1).is_err());
    }
}
