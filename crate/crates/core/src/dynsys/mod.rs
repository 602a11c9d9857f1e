//! Deterministic discrete maps, reference oracle systems and trajectory
//! evolution.

mod oracles;
mod trajectory;

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use oracles::{
    make_oracle, Identity, LinearDiag, Lorenz, Torus, VanDerPol, ORACLE_NAMES,
};
pub use trajectory::Trajectory;

/// A named parameter: either a scalar or a vector (e.g. `diag` of a linear map).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Scalar(v)
    }
}

impl From<Vec<f64>> for ParamValue {
    fn from(v: Vec<f64>) -> Self {
        ParamValue::Vector(v)
    }
}

pub type Params = BTreeMap<String, ParamValue>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepKind {
    AnalyticMap,
    OdeRk4Discretized,
    Nca,
}

/// Spatial layout of a grid-structured state (row-major over height, width,
/// channels).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl GridShape {
    pub fn len(&self) -> usize {
        self.height * self.width * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A deterministic map `f: R^D -> R^D`.
///
/// Implementations must be pure: stepping the same input twice yields
/// bit-identical output, and no interior mutability is allowed so handles can
/// be shared across threads.
pub trait DynamicalSystem: Send + Sync {
    fn name(&self) -> &str;

    fn dim(&self) -> usize;

    fn params(&self) -> Params;

    fn step_kind(&self) -> StepKind;

    /// Writes `f(x)` into `out`. Both slices have length `dim()`.
    fn step_into(&self, x: &[f64], out: &mut [f64]);

    /// Integration step for ODE-discretized systems; exponents and
    /// frequencies are reported per unit time when this is set.
    fn time_step(&self) -> Option<f64> {
        None
    }

    /// Grid layout for cellular systems.
    fn grid(&self) -> Option<GridShape> {
        None
    }

    /// Conventional starting state for this system.
    fn default_initial_state(&self) -> StateVector {
        StateVector(vec![1.0; self.dim()])
    }
}

pub type SystemHandle = Arc<dyn DynamicalSystem>;

/// Serializable description of a system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemInfo {
    pub name: String,
    pub dim: usize,
    pub params: Params,
    pub step_kind: StepKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_step: Option<f64>,
}

impl SystemInfo {
    pub fn of(sys: &dyn DynamicalSystem) -> Self {
        SystemInfo {
            name: sys.name().to_string(),
            dim: sys.dim(),
            params: sys.params(),
            step_kind: sys.step_kind(),
            time_step: sys.time_step(),
        }
    }
}

/// A finite state vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput { index });
        }
        Ok(StateVector(values))
    }

    pub fn zeros(dim: usize) -> Self {
        StateVector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Wraps a vector already known to be finite.
    pub(crate) fn from_finite(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        StateVector(values)
    }
}

impl Deref for StateVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for StateVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        StateVector::new(v)
    }
}

impl From<StateVector> for Vec<f64> {
    fn from(s: StateVector) -> Self {
        s.0
    }
}

impl fmt::Display for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "]")
    }
}

/// Which coordinates of a state are recorded into a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Observation {
    #[default]
    Full,
    /// A rectangular window of a grid state, all channels.
    GridCrop {
        top: usize,
        left: usize,
        height: usize,
        width: usize,
    },
}

impl Observation {
    /// Centered square crop of side `size`.
    pub fn centered_crop(grid: GridShape, size: usize) -> Result<Self> {
        if size == 0 || size > grid.height || size > grid.width {
            return Err(Error::invalid(format!(
                "crop {size} does not fit a {}x{} grid",
                grid.height, grid.width
            )));
        }
        Ok(Observation::GridCrop {
            top: (grid.height - size) / 2,
            left: (grid.width - size) / 2,
            height: size,
            width: size,
        })
    }

    pub fn observed_dim(&self, sys: &dyn DynamicalSystem) -> Result<usize> {
        match *self {
            Observation::Full => Ok(sys.dim()),
            Observation::GridCrop {
                top,
                left,
                height,
                width,
            } => {
                let grid = sys
                    .grid()
                    .ok_or_else(|| Error::invalid("grid crop requested for a non-grid system"))?;
                if height == 0 || width == 0 || top + height > grid.height || left + width > grid.width
                {
                    return Err(Error::invalid("grid crop exceeds the system grid"));
                }
                Ok(height * width * grid.channels)
            }
        }
    }

    pub(crate) fn write(&self, grid: Option<GridShape>, x: &[f64], out: &mut Vec<f64>) {
        match *self {
            Observation::Full => out.extend_from_slice(x),
            Observation::GridCrop {
                top,
                left,
                height,
                width,
            } => {
                let g = grid.expect("validated by observed_dim");
                for y in top..top + height {
                    let start = (y * g.width + left) * g.channels;
                    out.extend_from_slice(&x[start..start + width * g.channels]);
                }
            }
        }
    }
}

pub(crate) fn check_input(sys: &dyn DynamicalSystem, x: &[f64]) -> Result<()> {
    if x.len() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            found: x.len(),
        });
    }
    if let Some(index) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput { index });
    }
    Ok(())
}

#[inline]
pub(crate) fn check_output(out: &[f64], step: usize) -> Result<()> {
    match out.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NumericalBlowup { step, index }),
        None => Ok(()),
    }
}

/// One application of the map. The input is not modified.
pub fn step(sys: &dyn DynamicalSystem, x: &StateVector) -> Result<StateVector> {
    check_input(sys, x)?;
    let mut out = vec![0.0; sys.dim()];
    sys.step_into(x, &mut out);
    check_output(&out, 1)?;
    Ok(StateVector::from_finite(out))
}

/// Advances `x` in place by `n` steps. `t0` is the absolute timestep of the
/// input, used for error reporting.
pub(crate) fn advance_in_place(
    sys: &dyn DynamicalSystem,
    x: &mut Vec<f64>,
    scratch: &mut Vec<f64>,
    n: usize,
    t0: usize,
) -> Result<()> {
    scratch.resize(x.len(), 0.0);
    for k in 0..n {
        sys.step_into(x, scratch);
        check_output(scratch, t0 + k + 1)?;
        std::mem::swap(x, scratch);
    }
    Ok(())
}

/// Evolves `n_steps` steps, recording every `record_every`-th state starting
/// with `x0`. Yields `n_steps / record_every + 1` rows; `n_steps` must be a
/// multiple of `record_every` so that the last row is the final state.
pub fn evolve(
    sys: &dyn DynamicalSystem,
    x0: &StateVector,
    n_steps: usize,
    record_every: usize,
) -> Result<Trajectory> {
    evolve_observed(sys, x0, n_steps, record_every, Observation::Full)
}

/// [`evolve`] recording only the coordinates selected by `observation`.
pub fn evolve_observed(
    sys: &dyn DynamicalSystem,
    x0: &StateVector,
    n_steps: usize,
    record_every: usize,
    observation: Observation,
) -> Result<Trajectory> {
    check_input(sys, x0)?;
    if n_steps == 0 || record_every == 0 {
        return Err(Error::invalid("n_steps and record_every must be positive"));
    }
    if n_steps % record_every != 0 {
        return Err(Error::invalid(format!(
            "n_steps ({n_steps}) must be a multiple of record_every ({record_every})"
        )));
    }
    let obs_dim = observation.observed_dim(sys)?;
    let grid = sys.grid();
    let rows = n_steps / record_every + 1;
    let mut data = Vec::with_capacity(rows * obs_dim);
    observation.write(grid, x0, &mut data);

    let mut x = x0.as_slice().to_vec();
    let mut scratch = vec![0.0; x.len()];
    for r in 1..rows {
        advance_in_place(sys, &mut x, &mut scratch, record_every, (r - 1) * record_every)?;
        observation.write(grid, &x, &mut data);
    }
    Trajectory::from_flat(data, obs_dim, 0, record_every as f64)
}

/// The state after `n_burn` steps; intermediates are discarded.
pub fn burn_in(sys: &dyn DynamicalSystem, x0: &StateVector, n_burn: usize) -> Result<StateVector> {
    check_input(sys, x0)?;
    let mut x = x0.as_slice().to_vec();
    let mut scratch = Vec::new();
    advance_in_place(sys, &mut x, &mut scratch, n_burn, 0)?;
    Ok(StateVector::from_finite(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(pairs: &[(&str, ParamValue)]) -> Params {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect()
    }

    /// Map whose second step overflows.
    struct Squarer;

    impl DynamicalSystem for Squarer {
        fn name(&self) -> &str {
            "squarer"
        }
        fn dim(&self) -> usize {
            2
        }
        fn params(&self) -> Params {
            Params::new()
        }
        fn step_kind(&self) -> StepKind {
            StepKind::AnalyticMap
        }
        fn step_into(&self, x: &[f64], out: &mut [f64]) {
            out[0] = x[0];
            out[1] = x[1] * x[1];
        }
    }

    #[test]
    fn identity_evolution_repeats_the_initial_state() {
        let sys = make_oracle("identity", &params(&[("dim", 3.0.into())])).unwrap();
        let x0 = StateVector::new(vec![0.5, -1.0, 2.0]).unwrap();
        let traj = evolve(sys.as_ref(), &x0, 100, 1).unwrap();
        assert_eq!(traj.len(), 101);
        for row in traj.rows() {
            assert_eq!(row, x0.as_slice());
        }
    }

    #[test]
    fn evolve_last_row_is_composition_of_steps() {
        let sys = make_oracle("lorenz", &Params::new()).unwrap();
        let x0 = StateVector::new(vec![1.0, 1.0, 1.0]).unwrap();
        let traj = evolve(sys.as_ref(), &x0, 10, 1).unwrap();
        let mut x = x0.clone();
        for _ in 0..10 {
            x = step(sys.as_ref(), &x).unwrap();
        }
        assert_eq!(traj.last_row(), x.as_slice());
    }

    #[test]
    fn record_every_subsamples() {
        let sys = make_oracle("linear_diag", &params(&[("diag", vec![0.5].into())])).unwrap();
        let x0 = StateVector::new(vec![1.0]).unwrap();
        let traj = evolve(sys.as_ref(), &x0, 12, 4).unwrap();
        assert_eq!(traj.len(), 4);
        assert_eq!(traj.row(1), &[0.0625]);
        assert_eq!(traj.dt(), 4.0);
        assert!(evolve(sys.as_ref(), &x0, 10, 4).is_err());
    }

    #[test]
    fn burn_in_zero_returns_input() {
        let sys = make_oracle("lorenz", &Params::new()).unwrap();
        let x0 = StateVector::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(burn_in(sys.as_ref(), &x0, 0).unwrap(), x0);
    }

    #[test]
    fn burn_in_matches_evolve_last_row() {
        let sys = make_oracle("lorenz", &Params::new()).unwrap();
        let x0 = StateVector::new(vec![1.0, 1.0, 1.0]).unwrap();
        let b = burn_in(sys.as_ref(), &x0, 4000).unwrap();
        let traj = evolve(sys.as_ref(), &x0, 4000, 4000).unwrap();
        assert_eq!(traj.len(), 2);
        assert_eq!(b.as_slice(), traj.last_row());
    }

    #[test]
    fn blowup_reports_step_and_index() {
        let x0 = StateVector::new(vec![1.0, 1e100]).unwrap();
        let err = evolve(&Squarer, &x0, 5, 1).unwrap_err();
        match err {
            Error::NumericalBlowup { step, index } => {
                assert_eq!(step, 2);
                assert_eq!(index, 1);
            }
            other => panic!("unexpected {other:?}"),
        }
        let err = step(&Squarer, &StateVector::new(vec![0.0, 1e300]).unwrap()).unwrap_err();
        assert!(matches!(err, Error::NumericalBlowup { step: 1, index: 1 }));
    }

    #[test]
    fn rejects_wrong_dimension_and_non_finite_states() {
        let sys = make_oracle("lorenz", &Params::new()).unwrap();
        let x = StateVector::new(vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            step(sys.as_ref(), &x),
            Err(Error::DimensionMismatch { expected: 3, found: 2 })
        ));
        assert!(matches!(
            StateVector::new(vec![0.0, f64::NAN]),
            Err(Error::NonFiniteInput { index: 1 })
        ));
    }

    #[test]
    fn grid_crop_requires_a_grid() {
        let sys = make_oracle("identity", &params(&[("dim", 4.0.into())])).unwrap();
        let x0 = StateVector::zeros(4);
        let obs = Observation::GridCrop {
            top: 0,
            left: 0,
            height: 1,
            width: 1,
        };
        assert!(evolve_observed(sys.as_ref(), &x0, 1, 1, obs).is_err());
    }
}
