use attractors_core::reduce::{
    fit_pca, fit_pca_scaled, fit_scaler, intrinsic_dimension, project, volume_proxy, TrendVerdict,
};
use attractors_core::sampling::{seeded_rng, standard_normal};
use attractors_core::{burn_in, make_oracle, ParamValue, Params, StateVector, Trajectory};
use proptest::prelude::*;

fn gaussian(t: usize, d: usize, seed: u64) -> Vec<f64> {
    let mut rng = seeded_rng(seed);
    (0..t * d).map(|_| standard_normal(&mut rng)).collect()
}

/// `t` samples spanning exactly `r` random directions in `d` dimensions.
fn rank_r(t: usize, d: usize, r: usize, seed: u64) -> Trajectory {
    let coeffs = gaussian(t, r, seed);
    let raw = gaussian(r, d, seed + 1);
    // Orthonormal directions so that every one carries a similar share.
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for k in 0..r {
        let mut v = raw[k * d..(k + 1) * d].to_vec();
        for q in &basis {
            let p: f64 = v.iter().zip(q).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= p * b);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        basis.push(v.into_iter().map(|x| x / n).collect());
    }
    let mut data = vec![0.0; t * d];
    for i in 0..t {
        for (k, q) in basis.iter().enumerate() {
            for j in 0..d {
                data[i * d + j] += coeffs[i * r + k] * q[j];
            }
        }
    }
    Trajectory::from_flat(data, d, 0, 1.0).unwrap()
}

fn assert_orthonormal(rows: &[Vec<f64>]) {
    for (i, a) in rows.iter().enumerate() {
        for (j, b) in rows.iter().enumerate() {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((dot - want).abs() <= 1e-10, "({i},{j}) {dot}");
        }
    }
}

#[test]
fn rank_r_data_has_intrinsic_dimension_r() {
    for &r in &[1, 2, 5] {
        // Both the covariance (d < t) and Gram (d > t) routes.
        for &(t, d) in &[(200, 12), (40, 300)] {
            let traj = rank_r(t, d, r, r as u64 * 10 + d as u64);
            let m = fit_pca(&traj, 8).unwrap();
            assert_eq!(intrinsic_dimension(&m, 0.95).unwrap(), r, "t={t} d={d}");
            assert!((m.cumulative_ratio[r - 1] - 1.0).abs() <= 1e-9);
            assert_orthonormal(&m.components);
        }
    }
}

#[test]
fn isotropic_gaussian_has_equal_ratios() {
    let traj = Trajectory::from_flat(gaussian(10_000, 3, 77), 3, 0, 1.0).unwrap();
    let m = fit_pca(&traj, 3).unwrap();
    for r in &m.explained_variance_ratio {
        assert!((r - 1.0 / 3.0).abs() < 0.02, "{r}");
    }
}

#[test]
fn planar_ellipse_in_5d() {
    let rows: Vec<Vec<f64>> = (0..500)
        .map(|i| {
            let a = i as f64 * 0.1;
            let (u, v) = (3.0 * a.cos(), a.sin());
            vec![u + v, u - v, 0.5 * u, 2.0, -v]
        })
        .collect();
    let m = fit_pca(&Trajectory::from_rows(&rows).unwrap(), 4).unwrap();
    assert!(m.cumulative_ratio[1] >= 0.9999);
    assert_eq!(intrinsic_dimension(&m, 0.95).unwrap(), 2);
}

#[test]
fn projected_variances_are_eigenvalues() {
    let traj = rank_r(300, 6, 3, 5);
    let m = fit_pca(&traj, 3).unwrap();
    let p = project(&m, &traj).unwrap();
    for k in 0..3 {
        let col: Vec<f64> = p.column(k).collect();
        let mean = col.iter().sum::<f64>() / 300.0;
        let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 299.0;
        assert!((var - m.explained_variance[k]).abs() <= 1e-9 * m.explained_variance[0]);
    }
}

#[test]
fn scaled_pca_centers_and_scales_first() {
    let traj = rank_r(100, 4, 2, 3);
    let m = fit_pca_scaled(&traj, 2).unwrap();
    let s = fit_scaler(&traj).unwrap();
    assert_eq!(m.scaler.as_ref(), Some(&s));
    let direct = fit_pca(&s.apply(&traj).unwrap(), 2).unwrap();
    assert_eq!(project(&m, &traj).unwrap(), project(&direct, &s.apply(&traj).unwrap()).unwrap());
}

#[test]
fn contracting_map_is_dissipative() {
    let mut p = Params::new();
    p.insert("diag".into(), ParamValue::Vector(vec![0.9995, -0.999]));
    let sys = make_oracle("linear_diag", &p).unwrap();
    let r = volume_proxy(sys.as_ref(), &StateVector::new(vec![1.0, 1.0]).unwrap(), 6000, 200).unwrap();
    assert!(r.slope < 0.0);
    assert_eq!(r.verdict, TrendVerdict::Dissipative);
}

#[test]
fn torus_rotation_has_constant_volume() {
    let sys = make_oracle("torus", &Params::new()).unwrap();
    let x = burn_in(sys.as_ref(), &sys.default_initial_state(), 200).unwrap();
    let r = volume_proxy(sys.as_ref(), &x, 60_000, 2000).unwrap();
    assert!(r.slope.abs() <= 1e-6 * r.mean);
    assert_eq!(r.verdict, TrendVerdict::NoClearDownwardTrend);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn scaler_round_trip(t in 2usize..40, d in 1usize..8, seed in 0u64..1000, constant in any::<bool>()) {
        let mut data = gaussian(t, d, seed);
        if constant {
            for i in 0..t {
                data[i * d] = 5.0;
            }
        }
        let traj = Trajectory::from_flat(data, d, 0, 1.0).unwrap();
        let m = fit_scaler(&traj).unwrap();
        prop_assert!(m.scale.iter().all(|&s| s > 0.0));
        let scaled = m.apply(&traj).unwrap();
        for j in 0..d {
            let mean = scaled.column(j).sum::<f64>() / t as f64;
            prop_assert!(mean.abs() <= 1e-10);
        }
        let back = m.invert(&scaled).unwrap();
        for (a, b) in back.as_flat().iter().zip(traj.as_flat()) {
            prop_assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn components_orthonormal_and_projection_contracts(t in 3usize..30, d in 1usize..30, seed in 0u64..1000) {
        let traj = Trajectory::from_flat(gaussian(t, d, seed), d, 0, 1.0).unwrap();
        let r = (t - 1).min(d).min(4);
        let m = fit_pca(&traj, r).unwrap();
        assert_orthonormal(&m.components);
        prop_assert!(m.cumulative_ratio.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(m.explained_variance_ratio.iter().all(|&q| (0.0..=1.0).contains(&q)));
        let p = project(&m, &traj).unwrap();
        for i in 0..t {
            for j in 0..i {
                let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
                prop_assert!(dist(p.row(i), p.row(j)) <= dist(traj.row(i), traj.row(j)) + 1e-9);
            }
        }
    }
}
