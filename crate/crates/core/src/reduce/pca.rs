use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scaler::{fit_scaler, ScalerModel};
use crate::dynsys::Trajectory;
use crate::error::{Error, Result};

/// Eigenvalues below this fraction of the largest are treated as zero.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fitting {
    Scaled,
    Unscaled,
}

/// Principal axes of a trajectory, strongest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    /// Centering vector in the fitted (possibly scaled) space.
    pub mean: Vec<f64>,
    /// Orthonormal rows of length `D`.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    pub cumulative_ratio: Vec<f64>,
    pub fitted_on: Fitting,
    /// Applied before centering when `fitted_on` is `Scaled`.
    pub scaler: Option<ScalerModel>,
}

/// Metadata written next to the binary tensors by [`PcaModel::save`].
#[derive(Serialize, Deserialize)]
struct PcaHeader {
    dim: usize,
    n_components: usize,
    explained_variance: Vec<f64>,
    explained_variance_ratio: Vec<f64>,
    cumulative_ratio: Vec<f64>,
    fitted_on: Fitting,
    /// Order of the little-endian `f64` arrays in the sidecar file.
    tensors: Vec<String>,
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// Writes `<path>` (JSON metadata) and `<path>.bin` (tensors).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut tensors = vec!["mean".to_string(), "components".to_string()];
        if self.scaler.is_some() {
            tensors.extend(["scaler_mean".to_string(), "scaler_scale".to_string()]);
        }
        let header = PcaHeader {
            dim: self.dim(),
            n_components: self.n_components(),
            explained_variance: self.explained_variance.clone(),
            explained_variance_ratio: self.explained_variance_ratio.clone(),
            cumulative_ratio: self.cumulative_ratio.clone(),
            fitted_on: self.fitted_on,
            tensors,
        };
        std::fs::write(path, serde_json::to_string_pretty(&header)? + "\n")?;
        let mut w = BufWriter::new(File::create(sidecar(path))?);
        let mut put = |v: &[f64]| -> Result<()> {
            for x in v {
                w.write_all(&x.to_le_bytes())?;
            }
            Ok(())
        };
        put(&self.mean)?;
        for c in &self.components {
            put(c)?;
        }
        if let Some(s) = &self.scaler {
            put(&s.mean)?;
            put(&s.scale)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<PcaModel> {
        let path = path.as_ref();
        let header: PcaHeader = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        let mut bytes = Vec::new();
        BufReader::new(File::open(sidecar(path))?).read_to_end(&mut bytes)?;
        let scaled = header.fitted_on == Fitting::Scaled;
        let d = header.dim;
        let expected = d * (1 + header.n_components + if scaled { 2 } else { 0 }) * 8;
        if bytes.len() != expected {
            return Err(Error::MalformedTrajectory(format!(
                "PCA sidecar has {} bytes, expected {expected}",
                bytes.len()
            )));
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let mut chunks = values.chunks_exact(d).map(<[f64]>::to_vec);
        let mean = chunks.next().unwrap();
        let components = (0..header.n_components).map(|_| chunks.next().unwrap()).collect();
        let scaler = scaled.then(|| ScalerModel {
            mean: chunks.next().unwrap(),
            scale: chunks.next().unwrap(),
        });
        Ok(PcaModel {
            mean,
            components,
            explained_variance: header.explained_variance,
            explained_variance_ratio: header.explained_variance_ratio,
            cumulative_ratio: header.cumulative_ratio,
            fitted_on: header.fitted_on,
            scaler,
        })
    }
}

fn sidecar(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".bin");
    s.into()
}

/// Top-`r` principal components of the unscaled data.
pub fn fit_pca(traj: &Trajectory, r: usize) -> Result<PcaModel> {
    fit(traj, r, Fitting::Unscaled, None)
}

/// Standard scaling followed by PCA; the scaler is stored in the model.
pub fn fit_pca_scaled(traj: &Trajectory, r: usize) -> Result<PcaModel> {
    let scaler = fit_scaler(traj)?;
    let scaled = scaler.apply(traj)?;
    fit(&scaled, r, Fitting::Scaled, Some(scaler))
}

fn fit(traj: &Trajectory, r: usize, fitted_on: Fitting, scaler: Option<ScalerModel>) -> Result<PcaModel> {
    let (t, d) = (traj.len(), traj.dim());
    if t < 2 {
        return Err(Error::TooShort {
            required: 2,
            found: t,
        });
    }
    if r == 0 || r > (t - 1).min(d) {
        return Err(Error::invalid(format!(
            "number of components must be in 1..={}, got {r}",
            (t - 1).min(d)
        )));
    }
    let mean = traj.mean();
    // Constant axes carry no variance; leaving them out keeps the Gram and
    // covariance matrices small for mostly dead NCA substrates.
    let active: Vec<usize> = (0..d)
        .filter(|&j| traj.column(j).any(|x| x != mean[j]))
        .collect();
    let a = active.len();
    let x = DMatrix::from_fn(t, a, |i, k| traj.row(i)[active[k]] - mean[active[k]]);
    let denom = (t - 1) as f64;
    let total: f64 = x.iter().map(|v| v * v).sum::<f64>() / denom;

    // (eigenvalue, direction over the active axes), strongest first.
    let mut pairs: Vec<(f64, Vec<f64>)> = Vec::new();
    if a > 0 && a <= t {
        let cov = x.tr_mul(&x) / denom;
        let eig = SymmetricEigen::new(cov);
        for (l, col) in sorted_eigen(&eig).into_iter().take(r) {
            pairs.push((l, eig.eigenvectors.column(col).iter().copied().collect()));
        }
    } else if a > t {
        let gram = &x * x.transpose() / denom;
        let eig = SymmetricEigen::new(gram);
        for (l, col) in sorted_eigen(&eig).into_iter().take(r) {
            if !(l > 0.0) {
                break;
            }
            let u = eig.eigenvectors.column(col);
            let v = x.tr_mul(&u) / (l * denom).sqrt();
            pairs.push((l, v.iter().copied().collect()));
        }
    }
    let lmax = pairs.first().map_or(0.0, |p| p.0);
    pairs.retain(|(l, _)| *l > lmax * RANK_TOL && *l > 0.0);

    let mut components: Vec<Vec<f64>> = Vec::with_capacity(r);
    let mut variance = Vec::with_capacity(r);
    for (l, v) in pairs {
        let mut full = vec![0.0; d];
        for (k, &j) in active.iter().enumerate() {
            full[j] = v[k];
        }
        components.push(full);
        variance.push(l);
    }
    // Complete rank-deficient fits with zero-variance directions.
    let mut axis = 0;
    while components.len() < r {
        let mut e = vec![0.0; d];
        e[axis] = 1.0;
        axis += 1;
        orthogonalize(&mut e, &components);
        let n = norm(&e);
        if n > 0.5 {
            e.iter_mut().for_each(|x| *x /= n);
            components.push(e);
            variance.push(0.0);
        }
    }
    for _ in 0..2 {
        for i in 0..components.len() {
            let (done, rest) = components.split_at_mut(i);
            orthogonalize(&mut rest[0], done);
            let n = norm(&rest[0]);
            rest[0].iter_mut().for_each(|x| *x /= n);
        }
    }
    for c in &mut components {
        fix_sign(c);
    }

    let ratio: Vec<f64> = variance
        .iter()
        .map(|l| if total > 0.0 { (l / total).clamp(0.0, 1.0) } else { 0.0 })
        .collect();
    let mut acc = 0.0;
    let cumulative = ratio
        .iter()
        .map(|q| {
            acc += q;
            acc.min(1.0)
        })
        .collect();
    Ok(PcaModel {
        mean,
        components,
        explained_variance: variance,
        explained_variance_ratio: ratio,
        cumulative_ratio: cumulative,
        fitted_on,
        scaler,
    })
}

/// `(eigenvalue, column)` pairs sorted by decreasing eigenvalue.
fn sorted_eigen(eig: &SymmetricEigen<f64, nalgebra::Dyn>) -> Vec<(f64, usize)> {
    let mut v: Vec<(f64, usize)> = eig.eigenvalues.iter().copied().zip(0..).collect();
    v.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    v
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for q in basis {
        let p: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
        v.iter_mut().zip(q).for_each(|(a, b)| *a -= p * b);
    }
}

/// Makes the largest-magnitude entry positive so fits are sign-stable.
fn fix_sign(v: &mut [f64]) {
    let big = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
    if big < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Coordinates of each state along the model's components.
pub fn project(model: &PcaModel, traj: &Trajectory) -> Result<Trajectory> {
    let d = model.dim();
    if traj.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: traj.dim(),
        });
    }
    let r = model.n_components();
    let mut out = vec![0.0; traj.len() * r];
    out.par_chunks_mut(r).enumerate().for_each(|(i, o)| {
        let mut x = traj.row(i).to_vec();
        if let Some(s) = &model.scaler {
            s.apply_row(traj.row(i), &mut x);
        }
        x.iter_mut().zip(&model.mean).for_each(|(a, m)| *a -= m);
        for (oj, c) in o.iter_mut().zip(&model.components) {
            *oj = x.iter().zip(c).map(|(a, b)| a * b).sum();
        }
    });
    Trajectory::from_flat(out, r, traj.t_start(), traj.dt())
}

/// Smallest number of components whose cumulative ratio reaches `tau`.
pub fn intrinsic_dimension(model: &PcaModel, tau: f64) -> Result<usize> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::invalid("tau must be in (0, 1)"));
    }
    match model.cumulative_ratio.iter().position(|&c| c >= tau) {
        Some(i) => Ok(i + 1),
        None => Err(Error::InsufficientRank {
            tau,
            achieved_components: model.n_components(),
            achieved_ratio: model.cumulative_ratio.last().copied().unwrap_or(0.0),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> Trajectory {
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|i| {
                let s = i as f64 - 7.0;
                vec![s, 2.0 * s, -0.5 * s]
            })
            .collect();
        Trajectory::from_rows(&rows).unwrap()
    }

    #[test]
    fn line_has_one_component() {
        let m = fit_pca(&line(), 3).unwrap();
        assert!((m.explained_variance_ratio[0] - 1.0).abs() < 1e-10);
        assert_eq!(m.explained_variance_ratio[1..], [0.0, 0.0]);
        assert_eq!(intrinsic_dimension(&m, 0.999999).unwrap(), 1);
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = m.components[i].iter().zip(&m.components[j]).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn gram_and_covariance_routes_agree() {
        // 6 samples in 10 dimensions uses the Gram route; the transpose
        // problem with a padded sample count uses the covariance route.
        let rows: Vec<Vec<f64>> = (0..6)
            .map(|i| (0..10).map(|j| ((i * 7 + j * 3) % 11) as f64 + (i * j) as f64 * 0.1).collect())
            .collect();
        let small = Trajectory::from_rows(&rows).unwrap();
        let g = fit_pca(&small, 3).unwrap();
        let mut padded = rows.clone();
        // Appending copies of the mean adds no variance beyond a rescaling.
        let mean = small.mean();
        padded.extend(std::iter::repeat_n(mean, 10));
        let c = fit_pca(&Trajectory::from_rows(&padded).unwrap(), 3).unwrap();
        for k in 0..3 {
            let dot: f64 = g.components[k].iter().zip(&c.components[k]).map(|(a, b)| a * b).sum();
            assert!((dot.abs() - 1.0).abs() < 1e-8, "component {k}: {dot}");
            assert!((g.explained_variance_ratio[k] - c.explained_variance_ratio[k]).abs() < 1e-10);
        }
    }

    #[test]
    fn too_many_components_is_rejected() {
        assert!(fit_pca(&line(), 4).is_err());
        let m = fit_pca(&line(), 1).unwrap();
        assert!(matches!(
            intrinsic_dimension(&m, 0.5),
            Ok(1)
        ));
    }

    #[test]
    fn insufficient_rank_reports_achieved_ratio() {
        let rows: Vec<Vec<f64>> = (0..10)
            .map(|i| vec![(i as f64).sin(), (i as f64 * 1.3).cos(), i as f64 * 0.01])
            .collect();
        let m = fit_pca(&Trajectory::from_rows(&rows).unwrap(), 1).unwrap();
        match intrinsic_dimension(&m, 0.99) {
            Err(Error::InsufficientRank {
                achieved_components: 1,
                achieved_ratio,
                ..
            }) => assert!(achieved_ratio < 0.99),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn save_and_load_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pca.json");
        let m = fit_pca_scaled(&line(), 2).unwrap();
        m.save(&path).unwrap();
        assert_eq!(PcaModel::load(&path).unwrap(), m);
    }
}
