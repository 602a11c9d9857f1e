//! Finite-difference Lyapunov exponents.
//!
//! A set of `n` perturbed copies of the reference state is evolved alongside
//! it. After every step the difference vectors are re-orthonormalized with
//! modified Gram-Schmidt, the log growth of each orthogonalized component is
//! accumulated, and the copies are reset to distance `epsilon` along the new
//! directions.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynsys::{check_input, check_output, DynamicalSystem, StateVector, StepKind};
use crate::error::{Error, Result};
use crate::sampling::{seeded_rng, standard_normal};

pub const DEFAULT_EPSILON: f64 = 1e-4;
/// Zero threshold for classification, in nats per step.
pub const DEFAULT_THETA_PER_STEP: f64 = 0.002;
pub const DEFAULT_CHECKPOINT_EVERY: usize = 100;
pub const DEFAULT_ALIGN_STEPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExponentUnit {
    PerStep,
    PerUnitTime,
}

impl ExponentUnit {
    pub fn of(sys: &dyn DynamicalSystem) -> Self {
        match (sys.step_kind(), sys.time_step()) {
            (StepKind::OdeRk4Discretized, Some(_)) => ExponentUnit::PerUnitTime,
            _ => ExponentUnit::PerStep,
        }
    }
}

/// Factor converting per-step values into the report unit of `sys`.
fn unit_scale(sys: &dyn DynamicalSystem) -> f64 {
    match (ExponentUnit::of(sys), sys.time_step()) {
        (ExponentUnit::PerUnitTime, Some(h)) => 1.0 / h,
        _ => 1.0,
    }
}

/// The default zero threshold expressed in the report unit of `sys`.
pub fn default_theta(sys: &dyn DynamicalSystem) -> f64 {
    DEFAULT_THETA_PER_STEP * unit_scale(sys)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovOptions {
    pub epsilon: f64,
    pub n_steps: usize,
    pub checkpoint_every: usize,
    /// Steps run before accumulation starts so that the random initial
    /// directions can align with the dominant ones. They still advance `x`.
    pub align_steps: usize,
    pub seed: u64,
    /// Zero threshold in report units; `None` uses [`default_theta`].
    pub theta: Option<f64>,
}

impl Default for LyapunovOptions {
    fn default() -> Self {
        LyapunovOptions {
            epsilon: DEFAULT_EPSILON,
            n_steps: 10_000,
            checkpoint_every: DEFAULT_CHECKPOINT_EVERY,
            align_steps: DEFAULT_ALIGN_STEPS,
            seed: 0,
            theta: None,
        }
    }
}

/// Attractor type implied by the signs of the exponents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttractorKind {
    FixedPoint,
    LimitCycle,
    QuasiPeriodic(usize),
    Chaotic(usize),
    Inconclusive,
}

impl fmt::Display for AttractorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttractorKind::FixedPoint => f.write_str("fixed_point"),
            AttractorKind::LimitCycle => f.write_str("limit_cycle"),
            AttractorKind::QuasiPeriodic(k) => write!(f, "quasi_periodic({k})"),
            AttractorKind::Chaotic(l) => write!(f, "chaotic({l})"),
            AttractorKind::Inconclusive => f.write_str("inconclusive"),
        }
    }
}

impl FromStr for AttractorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let arg = |prefix: &str| -> Option<usize> {
            s.strip_prefix(prefix)?.strip_suffix(')')?.parse().ok()
        };
        match s {
            "fixed_point" => Ok(AttractorKind::FixedPoint),
            "limit_cycle" => Ok(AttractorKind::LimitCycle),
            "inconclusive" => Ok(AttractorKind::Inconclusive),
            _ => arg("quasi_periodic(")
                .map(AttractorKind::QuasiPeriodic)
                .or_else(|| arg("chaotic(").map(AttractorKind::Chaotic))
                .ok_or_else(|| Error::invalid(format!("unknown attractor kind `{s}`"))),
        }
    }
}

impl Serialize for AttractorKind {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for AttractorKind {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttractorClass {
    pub kind: AttractorKind,
    pub zero_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    pub system: String,
    pub dim: usize,
    /// Descending.
    pub exponents: Vec<f64>,
    /// Accumulated steps at which running means were recorded; the last is
    /// `n_steps`.
    pub checkpoints: Vec<usize>,
    /// `running_means[i][c]` is the estimate of exponent `i` after
    /// `checkpoints[c]` steps.
    pub running_means: Vec<Vec<f64>>,
    pub epsilon: f64,
    pub n_steps: usize,
    pub align_steps: usize,
    pub unit: ExponentUnit,
    pub seed: u64,
    pub classification: AttractorClass,
}

impl LyapunovReport {
    pub fn theta(&self) -> f64 {
        self.classification.zero_threshold
    }

    /// CSV with one row per checkpoint: `step,lambda_1,...`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header = String::from("step");
        for i in 1..=self.exponents.len() {
            header.push_str(&format!(",lambda_{i}"));
        }
        writeln!(w, "{header}")?;
        for (c, step) in self.checkpoints.iter().enumerate() {
            let mut line = step.to_string();
            for series in &self.running_means {
                line.push(',');
                line.push_str(&series[c].to_string());
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Modified Gram-Schmidt in place. Returns the norms of the orthogonalized
/// residuals (the diagonal of R).
fn orthonormalize(vectors: &mut [Vec<f64>], step: usize) -> Result<Vec<f64>> {
    let mut norms = Vec::with_capacity(vectors.len());
    for i in 0..vectors.len() {
        let (done, rest) = vectors.split_at_mut(i);
        let v = &mut rest[0];
        let raw = norm(v);
        if raw == 0.0 {
            return Err(Error::DegenerateSeparation { step });
        }
        for q in done.iter() {
            let proj = dot(v, q);
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= proj * b);
        }
        let r = norm(v);
        if !(r > 1e-12 * raw) {
            return Err(Error::RankCollapse { step, direction: i });
        }
        v.iter_mut().for_each(|a| *a /= r);
        norms.push(r);
    }
    Ok(norms)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Leading `n_exponents` Lyapunov exponents starting from an on-attractor
/// state.
pub fn spectrum(
    sys: &dyn DynamicalSystem,
    x_attr: &StateVector,
    n_exponents: usize,
    opts: &LyapunovOptions,
) -> Result<LyapunovReport> {
    let dim = sys.dim();
    check_input(sys, x_attr)?;
    if n_exponents == 0 || n_exponents > dim {
        return Err(Error::invalid(format!(
            "n_exponents must be in 1..={dim}, got {n_exponents}"
        )));
    }
    if !(opts.epsilon.is_finite() && opts.epsilon > 0.0) {
        return Err(Error::invalid("epsilon must be positive"));
    }
    if opts.n_steps == 0 || opts.checkpoint_every == 0 {
        return Err(Error::invalid("n_steps and checkpoint_every must be positive"));
    }
    let scale = unit_scale(sys);
    let theta = opts.theta.unwrap_or(DEFAULT_THETA_PER_STEP * scale);
    if !(theta > 0.0) {
        return Err(Error::invalid("theta must be positive"));
    }
    let eps = opts.epsilon;

    let mut rng = seeded_rng(opts.seed);
    let mut dirs: Vec<Vec<f64>> = (0..n_exponents)
        .map(|_| (0..dim).map(|_| standard_normal(&mut rng)).collect())
        .collect();
    orthonormalize(&mut dirs, 0)?;

    let mut x = x_attr.as_slice().to_vec();
    let mut fx = vec![0.0; dim];
    let mut pre: Vec<Vec<f64>> = vec![vec![0.0; dim]; n_exponents];
    let mut post: Vec<Vec<f64>> = vec![vec![0.0; dim]; n_exponents];
    let mut sums = vec![0.0; n_exponents];
    let mut checkpoints = Vec::new();
    let mut running: Vec<Vec<f64>> = vec![Vec::new(); n_exponents];

    for t in 1..=opts.align_steps + opts.n_steps {
        // Perturbed points and their actual offsets from x.
        for (p, q) in pre.iter_mut().zip(&dirs) {
            for ((pj, xj), qj) in p.iter_mut().zip(&x).zip(q) {
                *pj = xj + eps * qj;
            }
        }
        sys.step_into(&x, &mut fx);
        check_output(&fx, t)?;
        post.par_iter_mut()
            .zip(pre.par_iter())
            .for_each(|(out, p)| sys.step_into(p, out));
        for out in post.iter_mut() {
            check_output(out, t)?;
            out.iter_mut().zip(&fx).for_each(|(a, b)| *a -= b);
        }
        for p in pre.iter_mut() {
            p.iter_mut().zip(&x).for_each(|(a, b)| *a -= b);
        }
        // Growth is measured against the realized initial offsets so that
        // rounding in x + eps*q cancels exactly.
        let r0 = orthonormalize(&mut pre, t)?;
        let r1 = orthonormalize(&mut post, t)?;
        std::mem::swap(&mut dirs, &mut post);
        std::mem::swap(&mut x, &mut fx);
        if t <= opts.align_steps {
            continue;
        }
        let k = t - opts.align_steps;
        for i in 0..n_exponents {
            sums[i] += (r1[i] / r0[i]).ln();
        }
        if k % opts.checkpoint_every == 0 || k == opts.n_steps {
            checkpoints.push(k);
            for (series, s) in running.iter_mut().zip(&sums) {
                series.push(s / k as f64 * scale);
            }
        }
    }

    let mut order: Vec<usize> = (0..n_exponents).collect();
    order.sort_by(|&a, &b| sums[b].total_cmp(&sums[a]));
    let running_means: Vec<Vec<f64>> = order.iter().map(|&i| running[i].clone()).collect();
    let exponents: Vec<f64> = running_means.iter().map(|s| *s.last().unwrap()).collect();
    let kind = classify_exponents(&exponents, dim, theta);
    Ok(LyapunovReport {
        system: sys.name().to_string(),
        dim,
        exponents,
        checkpoints,
        running_means,
        epsilon: eps,
        n_steps: opts.n_steps,
        align_steps: opts.align_steps,
        unit: ExponentUnit::of(sys),
        seed: opts.seed,
        classification: AttractorClass {
            kind,
            zero_threshold: theta,
        },
    })
}

/// Largest exponent and its running mean at each checkpoint.
pub fn top_exponent(
    sys: &dyn DynamicalSystem,
    x_attr: &StateVector,
    opts: &LyapunovOptions,
) -> Result<(f64, Vec<f64>)> {
    let mut report = spectrum(sys, x_attr, 1, opts)?;
    Ok((report.exponents[0], report.running_means.swap_remove(0)))
}

/// Attractor type from exponent signs, treating `|λ| <= theta` as zero.
pub fn classify_exponents(exponents: &[f64], dim: usize, theta: f64) -> AttractorKind {
    let positive = exponents.iter().filter(|&&l| l > theta).count();
    if positive > 0 {
        return AttractorKind::Chaotic(positive);
    }
    let zeros = exponents.iter().filter(|&&l| l.abs() <= theta).count();
    if zeros == exponents.len() && exponents.len() < dim {
        return AttractorKind::Inconclusive;
    }
    match zeros {
        0 => AttractorKind::FixedPoint,
        1 => AttractorKind::LimitCycle,
        k => AttractorKind::QuasiPeriodic(k),
    }
}

/// Re-classifies a report under a different zero threshold.
pub fn classify(report: &LyapunovReport, theta: f64) -> AttractorClass {
    AttractorClass {
        kind: classify_exponents(&report.exponents, report.dim, theta),
        zero_threshold: theta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::{make_oracle, ParamValue, Params};

    fn diag(d: &[f64]) -> crate::SystemHandle {
        let mut p = Params::new();
        p.insert("diag".into(), ParamValue::Vector(d.to_vec()));
        make_oracle("linear_diag", &p).unwrap()
    }

    fn opts(n_steps: usize) -> LyapunovOptions {
        LyapunovOptions {
            n_steps,
            ..Default::default()
        }
    }

    #[test]
    fn contraction_rate() {
        let sys = diag(&[0.5, 0.5]);
        let x = StateVector::new(vec![0.3, -0.2]).unwrap();
        let (l1, hist) = top_exponent(sys.as_ref(), &x, &opts(1000)).unwrap();
        assert!((l1 - 0.5f64.ln()).abs() < 1e-6, "{l1}");
        assert_eq!(hist.len(), 10);
        assert_eq!(*hist.last().unwrap(), l1);
    }

    #[test]
    fn identity_is_exactly_zero() {
        let sys = make_oracle("identity", &Params::new()).unwrap();
        let x = StateVector::new(vec![1.0, 2.0, 3.0]).unwrap();
        let r = spectrum(sys.as_ref(), &x, 3, &opts(500)).unwrap();
        assert_eq!(r.exponents, vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn checkpoints_end_at_last_step() {
        let sys = diag(&[2.0, 0.5]);
        let x = StateVector::new(vec![0.0, 0.0]).unwrap();
        let r = spectrum(sys.as_ref(), &x, 2, &opts(250)).unwrap();
        assert_eq!(r.checkpoints, vec![100, 200, 250]);
        for (e, s) in r.exponents.iter().zip(&r.running_means) {
            assert_eq!(e, s.last().unwrap());
        }
    }

    #[test]
    fn spectrum_is_sorted_regardless_of_axis_order() {
        let sys = diag(&[0.5, 2.0, 1.0]);
        let x = StateVector::zeros(3);
        let r = spectrum(sys.as_ref(), &x, 3, &opts(1000)).unwrap();
        let expected = [2f64.ln(), 0.0, 0.5f64.ln()];
        for (a, b) in r.exponents.iter().zip(expected) {
            assert!((a - b).abs() < 1e-6, "{:?}", r.exponents);
        }
    }

    #[test]
    fn too_many_exponents_is_rejected() {
        let sys = diag(&[0.5]);
        assert!(spectrum(sys.as_ref(), &StateVector::zeros(1), 2, &opts(10)).is_err());
    }

    #[test]
    fn collapsing_map_reports_degenerate_separation() {
        let sys = diag(&[0.0, 0.5]);
        let err = spectrum(sys.as_ref(), &StateVector::zeros(2), 2, &opts(10)).unwrap_err();
        assert!(
            matches!(err, Error::DegenerateSeparation { step: 1 } | Error::RankCollapse { step: 1, .. }),
            "{err}"
        );
    }

    #[test]
    fn classification_table() {
        use AttractorKind::*;
        assert_eq!(classify_exponents(&[-0.01, -0.02], 10, 0.002), FixedPoint);
        assert_eq!(classify_exponents(&[0.0, -0.002, -0.007], 10, 0.001), LimitCycle);
        assert_eq!(classify_exponents(&[0.906, 0.0, -14.573], 3, 0.05), Chaotic(1));
        assert_eq!(classify_exponents(&[0.0, 0.0, -0.7, -0.7], 4, 0.002), QuasiPeriodic(2));
        assert_eq!(classify_exponents(&[0.0, 0.0], 4, 0.002), Inconclusive);
        assert_eq!(classify_exponents(&[0.0, 0.0, 0.0], 3, 0.002), QuasiPeriodic(3));
    }

    #[test]
    fn kind_strings_round_trip() {
        use AttractorKind::*;
        for k in [FixedPoint, LimitCycle, QuasiPeriodic(3), Chaotic(2), Inconclusive] {
            assert_eq!(k.to_string().parse::<AttractorKind>().unwrap(), k);
        }
        let json = serde_json::to_string(&Chaotic(1)).unwrap();
        assert_eq!(json, "\"chaotic(1)\"");
    }

    #[test]
    fn csv_has_one_row_per_checkpoint() {
        let sys = diag(&[2.0, 0.5]);
        let r = spectrum(sys.as_ref(), &StateVector::zeros(2), 2, &opts(300)).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "step,lambda_1,lambda_2");
        assert_eq!(lines.len(), 4);
    }
}
