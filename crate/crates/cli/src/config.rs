//! Run configuration: defaults, TOML/JSON files and flag overrides.

use std::path::{Path, PathBuf};

use attractors_core::nca::{self, load_weights};
use attractors_core::perturb::{self, PerturbationKind, PerturbationSpec};
use attractors_core::spectral::{self, Window};
use attractors_core::{make_oracle, Observation, ParamValue, Params, SystemHandle};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Output directory. Not embedded in artifacts so that runs written to
    /// different places stay byte-identical.
    #[serde(skip_serializing)]
    pub out_dir: Option<PathBuf>,
    pub system: SystemConfig,
    pub simulate: SimulateConfig,
    pub lyapunov: LyapunovConfig,
    pub fourier: FourierConfig,
    pub pca: PcaConfig,
    pub volume: VolumeConfig,
    pub perturb: PerturbConfig,
    pub epochs: EpochsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemConfig {
    /// Oracle name, or `nca`.
    pub name: String,
    pub params: Params,
    /// NCAW file for `nca`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<PathBuf>,
    /// Substrate size for `nca`; defaults to the grid in the weight header.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    /// Side of the centered square recorded from NCA substrates. Zero
    /// records the full grid.
    pub crop: usize,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            name: "lorenz".into(),
            params: Params::new(),
            weights: None,
            height: None,
            width: None,
            crop: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub burn_in: usize,
    pub steps: usize,
    pub record_every: usize,
    /// `csv`, `atrj` or `both`.
    pub format: String,
    /// Also write the final NCA state as PNG.
    pub png: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            burn_in: 0,
            steps: 1000,
            record_every: 1,
            format: "csv".into(),
            png: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LyapunovConfig {
    pub burn_in: usize,
    pub steps: usize,
    /// Defaults to `min(dim, 10)`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_exponents: Option<usize>,
    pub epsilon: f64,
    /// Zero threshold in report units; defaults to 0.002 per step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    pub checkpoint_every: usize,
    pub align_steps: usize,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        LyapunovConfig {
            burn_in: 4000,
            steps: 10_000,
            n_exponents: None,
            epsilon: attractors_core::lyapunov::DEFAULT_EPSILON,
            theta: None,
            checkpoint_every: attractors_core::lyapunov::DEFAULT_CHECKPOINT_EVERY,
            align_steps: attractors_core::lyapunov::DEFAULT_ALIGN_STEPS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FourierConfig {
    pub burn_in: usize,
    /// Number of recorded samples.
    pub samples: usize,
    pub record_every: usize,
    pub detrend: bool,
    pub window: Window,
    pub min_power: f64,
    /// Matching tolerance in frequency units; defaults to two bins.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    pub max_coeff: i64,
    pub broadband_fraction: f64,
}

impl Default for FourierConfig {
    fn default() -> Self {
        FourierConfig {
            burn_in: 2000,
            samples: 8000,
            record_every: 1,
            detrend: true,
            window: Window::None,
            min_power: spectral::DEFAULT_MIN_POWER,
            tol: None,
            max_coeff: spectral::DEFAULT_MAX_COEFF,
            broadband_fraction: spectral::DEFAULT_BROADBAND_FRACTION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcaConfig {
    pub burn_in: usize,
    pub samples: usize,
    pub components: usize,
    pub tau: f64,
    pub scaled: bool,
    /// Sample indices splitting the recording into separately fitted
    /// intervals, e.g. `[200, 400, 1000]`. Empty fits one model.
    pub intervals: Vec<usize>,
}

impl Default for PcaConfig {
    fn default() -> Self {
        PcaConfig {
            burn_in: 2000,
            samples: 1000,
            components: 10,
            tau: 0.95,
            scaled: false,
            intervals: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VolumeConfig {
    pub burn_in: usize,
    pub total_steps: usize,
    pub window: usize,
}

impl Default for VolumeConfig {
    fn default() -> Self {
        VolumeConfig {
            burn_in: 4000,
            total_steps: attractors_core::reduce::DEFAULT_TOTAL_STEPS,
            window: attractors_core::reduce::DEFAULT_WINDOW,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbConfig {
    pub burn_in: usize,
    pub kind: PerturbationKind,
    pub noise_std: f64,
    pub circle_radius: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub circle_center: Option<(usize, usize)>,
    pub runs: usize,
    pub steps: usize,
    pub tail: usize,
    pub record_every: usize,
    pub mode_threshold: f64,
}

impl Default for PerturbConfig {
    fn default() -> Self {
        PerturbConfig {
            burn_in: 2000,
            kind: PerturbationKind::SmallNoise,
            noise_std: perturb::DEFAULT_NOISE_STD,
            circle_radius: perturb::DEFAULT_CIRCLE_RADIUS,
            circle_center: None,
            runs: 5,
            steps: perturb::DEFAULT_RECOVERY_STEPS,
            tail: perturb::DEFAULT_TAIL,
            record_every: 1,
            mode_threshold: perturb::DEFAULT_MODE_THRESHOLD,
        }
    }
}

impl PerturbConfig {
    pub fn spec(&self, seed: u64) -> PerturbationSpec {
        PerturbationSpec {
            kind: self.kind,
            noise_std: self.noise_std,
            circle_radius: self.circle_radius,
            circle_center: self.circle_center,
            rng_seed: seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpochsConfig {
    pub burn_in: usize,
    pub record: usize,
    pub lyapunov_steps: usize,
}

impl Default for EpochsConfig {
    fn default() -> Self {
        EpochsConfig {
            burn_in: 1000,
            record: 300,
            lyapunov_steps: 1000,
        }
    }
}

impl RunConfig {
    /// Reads a TOML config, or the `config` object of a JSON artifact.
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
        if is_json {
            let mut value: serde_json::Value =
                serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            if let Some(inner) = value.get_mut("config") {
                value = inner.take();
            }
            serde_json::from_value(value).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
        } else {
            toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
        }
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("results"))
    }

    pub fn is_nca(&self) -> bool {
        self.system.name == "nca"
    }

    pub fn build_system(&self) -> Result<SystemHandle, CliError> {
        let s = &self.system;
        if !self.is_nca() {
            return make_oracle(&s.name, &s.params).map_err(CliError::from);
        }
        if !s.params.is_empty() {
            return Err(CliError::config("nca takes no `params`; use weights/height/width"));
        }
        let path = s
            .weights
            .as_ref()
            .ok_or_else(|| CliError::config("system `nca` needs a weights file"))?;
        let w = load_weights(path)?;
        let (gh, gw) = w.training_grid();
        nca::as_system(&w, s.height.unwrap_or(gh), s.width.unwrap_or(gw)).map_err(CliError::from)
    }

    /// What recorded trajectories contain.
    pub fn observation(&self, sys: &SystemHandle) -> Result<Observation, CliError> {
        match sys.grid() {
            Some(g) if self.system.crop > 0 && self.system.crop < g.height.min(g.width) => {
                Observation::centered_crop(g, self.system.crop).map_err(CliError::from)
            }
            _ => Ok(Observation::Full),
        }
    }
}

/// Parses `KEY=VALUE` where VALUE is a number or a comma-separated list.
pub fn parse_param(arg: &str) -> Result<(String, ParamValue), CliError> {
    let (k, v) = arg
        .split_once('=')
        .ok_or_else(|| CliError::config(format!("expected KEY=VALUE, got `{arg}`")))?;
    let nums: Result<Vec<f64>, _> = v
        .trim_matches(|c| c == '[' || c == ']')
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect();
    let nums = nums.map_err(|_| CliError::config(format!("bad number in `{arg}`")))?;
    let value = if nums.len() == 1 && !v.contains(',') && !v.starts_with('[') {
        ParamValue::Scalar(nums[0])
    } else {
        ParamValue::Vector(nums)
    };
    Ok((k.trim().to_string(), value))
}
