//! Deterministic neural cellular automaton (growing-NCA architecture).
//!
//! Each cell perceives its 3x3 neighborhood through identity and Sobel
//! filters, a two-layer network maps the 48 perception features to a residual
//! update, and cells outside the living mask are cleared. All cells update on
//! every step.

mod rule;
mod substrate;
mod weights;

use std::sync::Arc;

use crate::dynsys::{DynamicalSystem, GridShape, ParamValue, Params, StateVector, StepKind, SystemHandle};
use crate::error::{Error, Result};

pub use rule::{nca_step, perceive, Rule, SOBEL_X, SOBEL_Y};
pub use substrate::{living_mask, seed_state, LivingMask, Substrate, ALIVE_THRESHOLD, ALPHA, CHANNELS};
pub use weights::{
    load_weights, save_weights, RuleWeights, DEFAULT_GRID, DEFAULT_HIDDEN, DEFAULT_KERNEL_NORM,
    NCAW_MAGIC, NCAW_VERSION, PERCEPTION_CHANNELS,
};

/// An NCA rule on a fixed `H x W` substrate, viewed as a map on the flattened
/// state of dimension `H * W * 16`.
#[derive(Debug, Clone)]
pub struct NcaSystem {
    rule: Rule,
    hidden: usize,
    kernel_norm: f64,
    height: usize,
    width: usize,
}

impl NcaSystem {
    pub fn new(weights: &RuleWeights, height: usize, width: usize) -> Result<Self> {
        if height < 3 || width < 3 {
            return Err(Error::invalid("NCA substrate must be at least 3x3"));
        }
        Ok(NcaSystem {
            rule: Rule::new(weights),
            hidden: weights.hidden(),
            kernel_norm: weights.kernel_norm(),
            height,
            width,
        })
    }

    pub fn shape(&self) -> GridShape {
        GridShape {
            height: self.height,
            width: self.width,
            channels: CHANNELS,
        }
    }
}

impl DynamicalSystem for NcaSystem {
    fn name(&self) -> &str {
        "nca"
    }

    fn dim(&self) -> usize {
        self.height * self.width * CHANNELS
    }

    fn params(&self) -> Params {
        [
            ("height", self.height as f64),
            ("width", self.width as f64),
            ("hidden", self.hidden as f64),
            ("kernel_norm", self.kernel_norm),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), ParamValue::Scalar(v)))
        .collect()
    }

    fn step_kind(&self) -> StepKind {
        StepKind::Nca
    }

    fn step_into(&self, x: &[f64], out: &mut [f64]) {
        self.rule.apply(self.height, self.width, x, out);
    }

    fn grid(&self) -> Option<GridShape> {
        Some(self.shape())
    }

    fn default_initial_state(&self) -> StateVector {
        seed_state(self.height, self.width)
            .expect("size validated in constructor")
            .to_state()
    }
}

pub fn as_system(weights: &RuleWeights, height: usize, width: usize) -> Result<SystemHandle> {
    Ok(Arc::new(NcaSystem::new(weights, height, width)?))
}
