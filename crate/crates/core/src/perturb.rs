//! Perturbation and recovery experiments.
//!
//! A state on the attractor is perturbed (Gaussian noise on living cells, or
//! a zeroed disc of cells), evolved until it settles, and the mean of the
//! settled tail is compared with the mean of a reference tail. A large
//! distance indicates that the system settled into a different mode.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynsys::{advance_in_place, check_input, DynamicalSystem, Observation, StateVector, Trajectory};
use crate::error::{Error, Result};
use crate::nca::{living_mask, Substrate, CHANNELS};
use crate::reduce::{fit_pca_scaled, project, PcaModel};
use crate::sampling::{seeded_rng, standard_normal, GAUSSIAN_SAMPLER};

pub const DEFAULT_NOISE_STD: f64 = 0.002;
pub const DEFAULT_CIRCLE_RADIUS: usize = 8;
pub const DEFAULT_RECOVERY_STEPS: usize = 1500;
pub const DEFAULT_TAIL: usize = 500;
pub const DEFAULT_MODE_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    SmallNoise,
    CircleDamage,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    pub noise_std: f64,
    pub circle_radius: usize,
    /// `(y, x)`; drawn uniformly over the living bounding box when absent.
    pub circle_center: Option<(usize, usize)>,
    pub rng_seed: u64,
}

impl PerturbationSpec {
    pub fn small_noise(noise_std: f64, rng_seed: u64) -> Self {
        PerturbationSpec {
            kind: PerturbationKind::SmallNoise,
            noise_std,
            circle_radius: DEFAULT_CIRCLE_RADIUS,
            circle_center: None,
            rng_seed,
        }
    }

    pub fn circle_damage(radius: usize, center: Option<(usize, usize)>, rng_seed: u64) -> Self {
        PerturbationSpec {
            kind: PerturbationKind::CircleDamage,
            noise_std: DEFAULT_NOISE_STD,
            circle_radius: radius,
            circle_center: center,
            rng_seed,
        }
    }

    /// `n` copies with seeds `rng_seed, rng_seed + 1, ...`.
    pub fn runs(&self, n: usize) -> Vec<PerturbationSpec> {
        (0..n as u64)
            .map(|i| PerturbationSpec {
                rng_seed: self.rng_seed.wrapping_add(i),
                ..*self
            })
            .collect()
    }
}

/// Adds `N(0, noise_std²)` to every channel of every living cell. Dead cells
/// are left untouched and consume no random numbers.
pub fn apply_small_noise(s: &Substrate, spec: &PerturbationSpec) -> Substrate {
    let mut out = s.clone();
    if spec.noise_std == 0.0 {
        return out;
    }
    let mask = living_mask(s);
    let mut rng = seeded_rng(spec.rng_seed);
    for y in 0..s.height() {
        for x in 0..s.width() {
            if mask.is_alive(y, x) {
                for v in out.cell_mut(y, x) {
                    *v += spec.noise_std * standard_normal(&mut rng);
                }
            }
        }
    }
    out
}

/// Center used by [`apply_circle_damage`] for this substrate.
pub fn circle_center(s: &Substrate, spec: &PerturbationSpec) -> (usize, usize) {
    if let Some(c) = spec.circle_center {
        return c;
    }
    match living_mask(s).bounding_box() {
        Some((y0, x0, y1, x1)) => {
            let mut rng = seeded_rng(spec.rng_seed);
            (rng.random_range(y0..=y1), rng.random_range(x0..=x1))
        }
        None => (s.height() / 2, s.width() / 2),
    }
}

/// Zeroes all channels of cells strictly inside the circle of radius
/// `circle_radius` around [`circle_center`].
pub fn apply_circle_damage(s: &Substrate, spec: &PerturbationSpec) -> Substrate {
    let (cy, cx) = circle_center(s, spec);
    zero_disc(s, (cy, cx), spec.circle_radius)
}

fn zero_disc(s: &Substrate, (cy, cx): (usize, usize), radius: usize) -> Substrate {
    let mut out = s.clone();
    let r2 = (radius * radius) as i64;
    for y in 0..s.height() {
        for x in 0..s.width() {
            let dy = y as i64 - cy as i64;
            let dx = x as i64 - cx as i64;
            if dy * dy + dx * dx < r2 {
                out.cell_mut(y, x).fill(0.0);
            }
        }
    }
    out
}

/// Applies `spec` to a state of `sys`. Grid systems use the substrate
/// operations; for other systems small noise perturbs every coordinate and
/// circle damage is rejected.
pub fn perturb_state(sys: &dyn DynamicalSystem, x: &StateVector, spec: &PerturbationSpec) -> Result<StateVector> {
    check_input(sys, x)?;
    if !(spec.noise_std.is_finite() && spec.noise_std >= 0.0) {
        return Err(Error::invalid("noise_std must be non-negative"));
    }
    match (sys.grid(), spec.kind) {
        (Some(g), kind) if g.channels == CHANNELS => {
            let s = Substrate::from_state(g, x)?;
            let out = match kind {
                PerturbationKind::SmallNoise => apply_small_noise(&s, spec),
                PerturbationKind::CircleDamage => {
                    if spec.circle_radius == 0 {
                        return Err(Error::invalid("circle radius must be at least 1"));
                    }
                    apply_circle_damage(&s, spec)
                }
            };
            Ok(out.to_state())
        }
        (_, PerturbationKind::SmallNoise) => {
            let mut rng = seeded_rng(spec.rng_seed);
            let v = x
                .iter()
                .map(|&xi| xi + spec.noise_std * standard_normal(&mut rng))
                .collect();
            StateVector::new(v)
        }
        (_, PerturbationKind::CircleDamage) => Err(Error::invalid(format!(
            "circle damage needs a cellular system, `{}` has no grid",
            sys.name()
        ))),
    }
}

/// Euclidean distance between the row means of two trajectories.
pub fn mode_distance(tail: &Trajectory, reference: &Trajectory) -> Result<f64> {
    if tail.dim() != reference.dim() {
        return Err(Error::DimensionMismatch {
            expected: reference.dim(),
            found: tail.dim(),
        });
    }
    Ok(distance(&tail.mean(), &reference.mean()))
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeVerdict {
    OriginalMode,
    SecondaryMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryOptions {
    pub steps: usize,
    pub tail: usize,
    /// Recording stride of the returned trajectory. The tail mean always
    /// uses every step.
    pub record_every: usize,
    pub observation: Observation,
    pub mode_threshold: f64,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        RecoveryOptions {
            steps: DEFAULT_RECOVERY_STEPS,
            tail: DEFAULT_TAIL,
            record_every: 1,
            observation: Observation::Full,
            mode_threshold: DEFAULT_MODE_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult {
    /// Observed states after steps `record_every, 2 * record_every, ...,
    /// steps`.
    pub trajectory: Trajectory,
    /// The rows of `trajectory` that fall in the last `tail` steps.
    pub converged_tail: Trajectory,
    /// Mean observed state over the last `tail` steps.
    pub tail_mean: Vec<f64>,
    pub mode_distance: f64,
    pub verdict: ModeVerdict,
}

/// Serializable digest of a [`RecoveryResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoverySummary {
    pub steps: usize,
    pub tail: usize,
    pub mode_distance: f64,
    pub mode_threshold: f64,
    pub verdict: ModeVerdict,
}

/// Evolves a perturbed state and compares its settled tail with
/// `reference_tail` (recorded with the same observation).
pub fn recover(
    sys: &dyn DynamicalSystem,
    x_perturbed: &StateVector,
    reference_tail: &Trajectory,
    opts: &RecoveryOptions,
) -> Result<RecoveryResult> {
    check_input(sys, x_perturbed)?;
    let RecoveryOptions {
        steps,
        tail,
        record_every,
        observation,
        mode_threshold,
    } = *opts;
    if tail == 0 || steps < tail {
        return Err(Error::invalid("need 1 <= tail <= steps"));
    }
    if record_every == 0 || steps % record_every != 0 {
        return Err(Error::invalid("steps must be a positive multiple of record_every"));
    }
    let obs_dim = observation.observed_dim(sys)?;
    if reference_tail.dim() != obs_dim {
        return Err(Error::DimensionMismatch {
            expected: obs_dim,
            found: reference_tail.dim(),
        });
    }
    let grid = sys.grid();
    let mut x = x_perturbed.as_slice().to_vec();
    let mut scratch = vec![0.0; x.len()];
    let mut obs = Vec::with_capacity(obs_dim);
    let mut data = Vec::with_capacity(steps / record_every * obs_dim);
    let mut tail_sum = vec![0.0; obs_dim];
    for t in 1..=steps {
        advance_in_place(sys, &mut x, &mut scratch, 1, t - 1)?;
        let in_tail = t > steps - tail;
        let recorded = t % record_every == 0;
        if !(in_tail || recorded) {
            continue;
        }
        obs.clear();
        observation.write(grid, &x, &mut obs);
        if in_tail {
            tail_sum.iter_mut().zip(&obs).for_each(|(a, b)| *a += b);
        }
        if recorded {
            data.extend_from_slice(&obs);
        }
    }
    let trajectory = Trajectory::from_flat(data, obs_dim, record_every as i64, record_every as f64)?;
    let tail_rows = tail.div_ceil(record_every).min(trajectory.len());
    let converged_tail = trajectory.tail(tail_rows);
    let tail_mean: Vec<f64> = tail_sum.iter().map(|s| s / tail as f64).collect();
    let mode_distance = distance(&tail_mean, &reference_tail.mean());
    let verdict = if mode_distance > mode_threshold {
        ModeVerdict::SecondaryMode
    } else {
        ModeVerdict::OriginalMode
    };
    Ok(RecoveryResult {
        trajectory,
        converged_tail,
        tail_mean,
        mode_distance,
        verdict,
    })
}

impl RecoveryResult {
    pub fn summary(&self, opts: &RecoveryOptions) -> RecoverySummary {
        RecoverySummary {
            steps: opts.steps,
            tail: opts.tail,
            mode_distance: self.mode_distance,
            mode_threshold: opts.mode_threshold,
            verdict: self.verdict,
        }
    }
}

/// Two-component views of one run: the reference tail and the recovery
/// trajectory in a shared basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// True when the basis was fitted on both tails, false when it is the
    /// reference attractor's own basis.
    pub refit: bool,
    pub reference: Trajectory,
    pub recovery: Trajectory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchRun {
    pub index: usize,
    pub spec: PerturbationSpec,
    pub outcome: std::result::Result<(RecoveryResult, Projection), String>,
}

/// One line of a batch manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub index: usize,
    pub seed: u64,
    pub spec: PerturbationSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<ModeVerdict>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode_distance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub gaussian_sampler: String,
    pub runs: Vec<ManifestEntry>,
}

impl BatchRun {
    pub fn manifest_entry(&self) -> ManifestEntry {
        let (verdict, mode_distance, error) = match &self.outcome {
            Ok((r, _)) => (Some(r.verdict), Some(r.mode_distance), None),
            Err(e) => (None, None, Some(e.clone())),
        };
        ManifestEntry {
            index: self.index,
            seed: self.spec.rng_seed,
            spec: self.spec,
            verdict,
            mode_distance,
            error,
        }
    }
}

pub fn manifest(runs: &[BatchRun]) -> Manifest {
    Manifest {
        gaussian_sampler: GAUSSIAN_SAMPLER.to_string(),
        runs: runs.iter().map(BatchRun::manifest_entry).collect(),
    }
}

/// Runs one perturbation/recovery cycle per spec, in parallel. Failures are
/// recorded per run. Small-noise runs are shown in a scaler+PCA basis
/// refitted on both tails; damage runs reuse `reference_model`, the basis of
/// the unperturbed attractor.
pub fn batch_perturbation_study(
    sys: &dyn DynamicalSystem,
    x_attr: &StateVector,
    reference_tail: &Trajectory,
    reference_model: &PcaModel,
    specs: &[PerturbationSpec],
    opts: &RecoveryOptions,
) -> Vec<BatchRun> {
    specs
        .par_iter()
        .enumerate()
        .map(|(index, spec)| {
            let outcome = run_one(sys, x_attr, reference_tail, reference_model, spec, opts)
                .map_err(|e| e.to_string());
            BatchRun {
                index,
                spec: *spec,
                outcome,
            }
        })
        .collect()
}

fn run_one(
    sys: &dyn DynamicalSystem,
    x_attr: &StateVector,
    reference_tail: &Trajectory,
    reference_model: &PcaModel,
    spec: &PerturbationSpec,
    opts: &RecoveryOptions,
) -> Result<(RecoveryResult, Projection)> {
    let x = perturb_state(sys, x_attr, spec)?;
    let result = recover(sys, &x, reference_tail, opts)?;
    let projection = match spec.kind {
        PerturbationKind::SmallNoise => {
            let both = reference_tail.concat(&result.converged_tail)?;
            let r = reference_model.n_components().min(both.len() - 1).min(both.dim());
            let model = fit_pca_scaled(&both, r)?;
            Projection {
                refit: true,
                reference: project(&model, reference_tail)?,
                recovery: project(&model, &result.trajectory)?,
            }
        }
        PerturbationKind::CircleDamage => Projection {
            refit: false,
            reference: project(reference_model, reference_tail)?,
            recovery: project(reference_model, &result.trajectory)?,
        },
    };
    Ok((result, projection))
}
