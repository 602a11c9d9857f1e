//! Attractor analysis for deterministic discrete dynamical systems.
//!
//! The crate evolves maps `x_{t+1} = f(x_t)` (reference ODE oracles discretized
//! with RK4, analytic maps, and a deterministic neural cellular automaton) and
//! characterizes their long-term behavior with:
//!
//! - finite-difference Lyapunov spectra ([`lyapunov`]),
//! - variable-averaged Fourier power spectra with harmonic and
//!   linear-combination filtering ([`spectral`]),
//! - standard scaling, PCA and a volume proxy for slow dissipation ([`reduce`]),
//! - perturbation/recovery experiments ([`perturb`]).

pub mod dynsys;
pub mod error;
pub mod lyapunov;
pub mod nca;
pub mod perturb;
pub mod reduce;
pub mod sampling;
pub mod spectral;

pub use dynsys::{
    burn_in, evolve, evolve_observed, make_oracle, step, DynamicalSystem, GridShape, Observation,
    ParamValue, Params, StateVector, StepKind, SystemHandle, Trajectory,
};
pub use error::{Error, Result};
