use serde::{Deserialize, Serialize};

use crate::dynsys::Trajectory;
use crate::error::{Error, Result};

/// Per-axis standardization `(x - mean) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerModel {
    pub mean: Vec<f64>,
    /// Population standard deviation, or 1.0 for constant axes.
    pub scale: Vec<f64>,
}

pub fn fit_scaler(traj: &Trajectory) -> Result<ScalerModel> {
    let t = traj.len();
    if t < 2 {
        return Err(Error::TooShort {
            required: 2,
            found: t,
        });
    }
    let mean = traj.mean();
    let mut var = vec![0.0; traj.dim()];
    for row in traj.rows() {
        for ((v, x), m) in var.iter_mut().zip(row).zip(&mean) {
            *v += (x - m) * (x - m);
        }
    }
    let scale = var
        .iter()
        .map(|v| {
            let s = (v / t as f64).sqrt();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    Ok(ScalerModel { mean, scale })
}

impl ScalerModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn check(&self, traj: &Trajectory) -> Result<()> {
        if traj.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: traj.dim(),
            });
        }
        Ok(())
    }

    pub fn apply_row(&self, row: &[f64], out: &mut [f64]) {
        for (((o, x), m), s) in out.iter_mut().zip(row).zip(&self.mean).zip(&self.scale) {
            *o = (x - m) / s;
        }
    }

    pub fn apply(&self, traj: &Trajectory) -> Result<Trajectory> {
        self.check(traj)?;
        let mut data = vec![0.0; traj.as_flat().len()];
        for (row, out) in traj.rows().zip(data.chunks_exact_mut(self.dim())) {
            self.apply_row(row, out);
        }
        Trajectory::from_flat(data, self.dim(), traj.t_start(), traj.dt())
    }

    pub fn invert(&self, traj: &Trajectory) -> Result<Trajectory> {
        self.check(traj)?;
        let mut data = traj.as_flat().to_vec();
        for row in data.chunks_exact_mut(self.dim()) {
            for ((x, m), s) in row.iter_mut().zip(&self.mean).zip(&self.scale) {
                *x = *x * s + m;
            }
        }
        Trajectory::from_flat(data, self.dim(), traj.t_start(), traj.dt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_column_maps_to_zero() {
        let t = Trajectory::from_rows(&[vec![5.0, 1.0], vec![5.0, 3.0]]).unwrap();
        let m = fit_scaler(&t).unwrap();
        assert_eq!(m.mean, vec![5.0, 2.0]);
        assert_eq!(m.scale, vec![1.0, 1.0]);
        let s = m.apply(&t).unwrap();
        assert_eq!(s.column(0).collect::<Vec<_>>(), vec![0.0, 0.0]);
        assert_eq!(s.column(1).collect::<Vec<_>>(), vec![-1.0, 1.0]);
    }

    #[test]
    fn single_row_is_too_short() {
        let t = Trajectory::from_rows(&[vec![1.0]]).unwrap();
        assert!(matches!(fit_scaler(&t), Err(Error::TooShort { .. })));
    }
}
