//! Reference systems with known attractor types.

use std::f64::consts::PI;
use std::sync::Arc;

use super::{DynamicalSystem, ParamValue, Params, StateVector, StepKind, SystemHandle};
use crate::error::{Error, Result};

pub const ORACLE_NAMES: &[&str] = &["lorenz", "van_der_pol", "torus", "linear_diag", "identity"];

const DEFAULT_H: f64 = 0.01;

/// Golden ratio, used as the default frequency ratio of the torus.
const GOLDEN: f64 = 1.618_033_988_749_895;

/// Builds one of the oracle systems. Unknown parameter names are rejected.
pub fn make_oracle(name: &str, params: &Params) -> Result<SystemHandle> {
    let mut p = ParamReader::new(params);
    let sys: SystemHandle = match name {
        "lorenz" => Arc::new(Lorenz {
            sigma: p.scalar("sigma", 10.0)?,
            rho: p.scalar("rho", 28.0)?,
            beta: p.scalar("beta", 8.0 / 3.0)?,
            h: p.positive("h", DEFAULT_H)?,
        }),
        "van_der_pol" => Arc::new(VanDerPol {
            mu: p.scalar("mu", 1.0)?,
            h: p.positive("h", DEFAULT_H)?,
        }),
        "torus" => {
            let omega1 = p.scalar("omega1", 2.0 * PI * 0.06)?;
            let omega2 = p.scalar("omega2", omega1 * GOLDEN)?;
            let contraction = p.scalar("contraction", 0.5)?;
            if !(0.0..1.0).contains(&contraction.abs()) {
                return Err(Error::invalid("torus contraction must satisfy |c| < 1"));
            }
            Arc::new(Torus {
                omega1,
                omega2,
                contraction,
            })
        }
        "linear_diag" => {
            let diag = p.vector("diag")?;
            if diag.is_empty() {
                return Err(Error::invalid("linear_diag needs a non-empty `diag`"));
            }
            Arc::new(LinearDiag { diag })
        }
        "identity" => {
            let dim = p.scalar("dim", 3.0)?;
            if dim < 1.0 || dim.fract() != 0.0 {
                return Err(Error::invalid("identity `dim` must be a positive integer"));
            }
            Arc::new(Identity { dim: dim as usize })
        }
        other => return Err(Error::UnknownSystem(other.to_string())),
    };
    p.finish(name)?;
    Ok(sys)
}

struct ParamReader<'a> {
    params: &'a Params,
    used: Vec<&'a str>,
}

impl<'a> ParamReader<'a> {
    fn new(params: &'a Params) -> Self {
        ParamReader {
            params,
            used: Vec::new(),
        }
    }

    fn get(&mut self, key: &str) -> Option<&'a ParamValue> {
        let (k, v) = self.params.get_key_value(key)?;
        self.used.push(k.as_str());
        Some(v)
    }

    fn scalar(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            None => Ok(default),
            Some(ParamValue::Scalar(v)) if v.is_finite() => Ok(*v),
            Some(_) => Err(Error::invalid(format!("parameter `{key}` must be a finite scalar"))),
        }
    }

    fn positive(&mut self, key: &str, default: f64) -> Result<f64> {
        let v = self.scalar(key, default)?;
        if v > 0.0 {
            Ok(v)
        } else {
            Err(Error::invalid(format!("parameter `{key}` must be positive")))
        }
    }

    fn vector(&mut self, key: &str) -> Result<Vec<f64>> {
        match self.get(key) {
            Some(ParamValue::Vector(v)) if v.iter().all(|x| x.is_finite()) => Ok(v.clone()),
            Some(ParamValue::Scalar(v)) if v.is_finite() => Ok(vec![*v]),
            Some(_) => Err(Error::invalid(format!("parameter `{key}` must be finite"))),
            None => Err(Error::invalid(format!("missing parameter `{key}`"))),
        }
    }

    fn finish(self, name: &str) -> Result<()> {
        match self.params.keys().find(|k| !self.used.contains(&k.as_str())) {
            Some(k) => Err(Error::invalid(format!("unknown parameter `{k}` for {name}"))),
            None => Ok(()),
        }
    }
}

#[inline]
fn rk4<const N: usize>(x: &[f64], h: f64, f: impl Fn(&[f64; N]) -> [f64; N], out: &mut [f64]) {
    let mut s = [0.0; N];
    s.copy_from_slice(x);
    let k1 = f(&s);
    let k2 = f(&std::array::from_fn(|i| s[i] + 0.5 * h * k1[i]));
    let k3 = f(&std::array::from_fn(|i| s[i] + 0.5 * h * k2[i]));
    let k4 = f(&std::array::from_fn(|i| s[i] + h * k3[i]));
    for i in 0..N {
        out[i] = s[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

/// Lorenz system, one fixed RK4 step per map application.
#[derive(Debug, Clone)]
pub struct Lorenz {
    pub sigma: f64,
    pub rho: f64,
    pub beta: f64,
    pub h: f64,
}

impl Lorenz {
    pub fn vector_field(&self, s: &[f64; 3]) -> [f64; 3] {
        let [x, y, z] = *s;
        [
            self.sigma * (y - x),
            x * (self.rho - z) - y,
            x * y - self.beta * z,
        ]
    }
}

impl DynamicalSystem for Lorenz {
    fn name(&self) -> &str {
        "lorenz"
    }

    fn dim(&self) -> usize {
        3
    }

    fn params(&self) -> Params {
        [
            ("sigma", self.sigma),
            ("rho", self.rho),
            ("beta", self.beta),
            ("h", self.h),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), ParamValue::Scalar(v)))
        .collect()
    }

    fn step_kind(&self) -> StepKind {
        StepKind::OdeRk4Discretized
    }

    fn step_into(&self, x: &[f64], out: &mut [f64]) {
        rk4(x, self.h, |s| self.vector_field(s), out);
    }

    fn time_step(&self) -> Option<f64> {
        Some(self.h)
    }
}

/// Van der Pol oscillator `x'' - mu (1 - x^2) x' + x = 0`, RK4-discretized.
#[derive(Debug, Clone)]
pub struct VanDerPol {
    pub mu: f64,
    pub h: f64,
}

impl DynamicalSystem for VanDerPol {
    fn name(&self) -> &str {
        "van_der_pol"
    }

    fn dim(&self) -> usize {
        2
    }

    fn params(&self) -> Params {
        [("mu", self.mu), ("h", self.h)]
            .into_iter()
            .map(|(k, v)| (k.to_string(), ParamValue::Scalar(v)))
            .collect()
    }

    fn step_kind(&self) -> StepKind {
        StepKind::OdeRk4Discretized
    }

    fn step_into(&self, x: &[f64], out: &mut [f64]) {
        let mu = self.mu;
        rk4(x, self.h, |&[p, v]| [v, mu * (1.0 - p * p) * v - p], out);
    }

    fn time_step(&self) -> Option<f64> {
        Some(self.h)
    }

    fn default_initial_state(&self) -> StateVector {
        StateVector(vec![2.0, 0.0])
    }
}

/// Attracting 2-torus embedded in R^4 as two planar circles.
///
/// Each plane `(u, v)` maps its angle `theta -> theta + omega` and its radius
/// `r -> 1 + contraction * (r - 1)`, so the unit torus attracts with exponent
/// `ln|contraction|` in both radial directions and both angles are neutral.
#[derive(Debug, Clone)]
pub struct Torus {
    pub omega1: f64,
    pub omega2: f64,
    pub contraction: f64,
}

impl Torus {
    fn rotate_plane(&self, u: f64, v: f64, omega: f64) -> (f64, f64) {
        let r = u.hypot(v);
        let (cu, su) = if r > 0.0 { (u / r, v / r) } else { (1.0, 0.0) };
        let r_new = 1.0 + self.contraction * (r - 1.0);
        let (s, c) = omega.sin_cos();
        (r_new * (c * cu - s * su), r_new * (s * cu + c * su))
    }

    /// Base frequencies in cycles per step.
    pub fn frequencies(&self) -> (f64, f64) {
        (self.omega1 / (2.0 * PI), self.omega2 / (2.0 * PI))
    }
}

impl DynamicalSystem for Torus {
    fn name(&self) -> &str {
        "torus"
    }

    fn dim(&self) -> usize {
        4
    }

    fn params(&self) -> Params {
        [
            ("omega1", self.omega1),
            ("omega2", self.omega2),
            ("contraction", self.contraction),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), ParamValue::Scalar(v)))
        .collect()
    }

    fn step_kind(&self) -> StepKind {
        StepKind::AnalyticMap
    }

    fn step_into(&self, x: &[f64], out: &mut [f64]) {
        let (a, b) = self.rotate_plane(x[0], x[1], self.omega1);
        let (c, d) = self.rotate_plane(x[2], x[3], self.omega2);
        out[0] = a;
        out[1] = b;
        out[2] = c;
        out[3] = d;
    }

    fn default_initial_state(&self) -> StateVector {
        StateVector(vec![1.0, 0.0, 1.0, 0.0])
    }
}

/// Elementwise scaling `x_i -> d_i x_i`.
#[derive(Debug, Clone)]
pub struct LinearDiag {
    pub diag: Vec<f64>,
}

impl DynamicalSystem for LinearDiag {
    fn name(&self) -> &str {
        "linear_diag"
    }

    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn params(&self) -> Params {
        Params::from([("diag".to_string(), ParamValue::Vector(self.diag.clone()))])
    }

    fn step_kind(&self) -> StepKind {
        StepKind::AnalyticMap
    }

    fn step_into(&self, x: &[f64], out: &mut [f64]) {
        for ((o, xi), d) in out.iter_mut().zip(x).zip(&self.diag) {
            *o = d * xi;
        }
    }
}

#[derive(Debug, Clone)]
pub struct Identity {
    pub dim: usize,
}

impl DynamicalSystem for Identity {
    fn name(&self) -> &str {
        "identity"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn params(&self) -> Params {
        Params::from([("dim".to_string(), ParamValue::Scalar(self.dim as f64))])
    }

    fn step_kind(&self) -> StepKind {
        StepKind::AnalyticMap
    }

    fn step_into(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::step;

    #[test]
    fn lorenz_origin_is_fixed() {
        let sys = make_oracle("lorenz", &Params::new()).unwrap();
        assert_eq!(sys.dim(), 3);
        let x = step(sys.as_ref(), &StateVector::zeros(3)).unwrap();
        assert_eq!(x.as_slice(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn torus_advances_angles_on_the_unit_torus() {
        let (w1, w2) = (0.3, 0.7);
        let params = Params::from([
            ("omega1".to_string(), ParamValue::Scalar(w1)),
            ("omega2".to_string(), ParamValue::Scalar(w2)),
        ]);
        let sys = make_oracle("torus", &params).unwrap();
        let (t1, t2) = (1.1_f64, -2.3_f64);
        let x = StateVector::new(vec![t1.cos(), t1.sin(), t2.cos(), t2.sin()]).unwrap();
        let y = step(sys.as_ref(), &x).unwrap();
        let expected = [
            (t1 + w1).cos(),
            (t1 + w1).sin(),
            (t2 + w2).cos(),
            (t2 + w2).sin(),
        ];
        for (a, b) in y.iter().zip(expected) {
            assert!((a - b).abs() < 1e-14, "{a} vs {b}");
        }
    }

    #[test]
    fn torus_default_frequency_ratio_is_golden() {
        let t = Torus {
            omega1: 2.0 * PI * 0.06,
            omega2: 2.0 * PI * 0.06 * GOLDEN,
            contraction: 0.5,
        };
        let (f1, f2) = t.frequencies();
        assert!((f1 - 0.06).abs() < 1e-15);
        assert!((f2 / f1 - GOLDEN).abs() < 1e-12);
    }

    #[test]
    fn linear_diag_scales_coordinates() {
        let params = Params::from([("diag".to_string(), ParamValue::Vector(vec![2.0, 0.5]))]);
        let sys = make_oracle("linear_diag", &params).unwrap();
        let y = step(sys.as_ref(), &StateVector::new(vec![3.0, 4.0]).unwrap()).unwrap();
        assert_eq!(y.as_slice(), &[6.0, 2.0]);
    }

    #[test]
    fn identity_respects_dim() {
        let params = Params::from([("dim".to_string(), ParamValue::Scalar(3.0))]);
        let sys = make_oracle("identity", &params).unwrap();
        assert_eq!(sys.dim(), 3);
        let x = StateVector::new(vec![1.0, -2.0, 3.5]).unwrap();
        assert_eq!(step(sys.as_ref(), &x).unwrap(), x);
    }

    #[test]
    fn unknown_names_and_parameters_are_rejected() {
        assert!(matches!(
            make_oracle("henon", &Params::new()),
            Err(Error::UnknownSystem(_))
        ));
        let params = Params::from([("sgima".to_string(), ParamValue::Scalar(10.0))]);
        assert!(matches!(
            make_oracle("lorenz", &params),
            Err(Error::InvalidArgument(_))
        ));
        assert!(make_oracle("linear_diag", &Params::new()).is_err());
    }

    #[test]
    fn params_round_trip_through_make_oracle() {
        for name in ORACLE_NAMES {
            let base = if *name == "linear_diag" {
                Params::from([("diag".to_string(), ParamValue::Vector(vec![0.3, 0.9]))])
            } else {
                Params::new()
            };
            let sys = make_oracle(name, &base).unwrap();
            let again = make_oracle(name, &sys.params()).unwrap();
            assert_eq!(sys.params(), again.params());
        }
    }
}
