//! `attractors`: evolve dynamical systems and classify their attractors.
//!
//! Every subcommand reads an optional TOML config (`--config`), applies flag
//! overrides on top and writes its artifacts to the output directory
//! (`--out`, `ATTRACTORS_OUT`, the config's `out_dir`, then `results`).
//! Exit codes: 0 on success, 2 for configuration or input errors, 3 for
//! numerical failures; errors are reported as one JSON line on stderr.

mod commands;
mod config;
mod error;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use attractors_core::perturb::PerturbationKind;
use attractors_core::spectral::Window;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{parse_param, RunConfig};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "attractors", version, about = "Attractor analysis for deterministic dynamical systems")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every subcommand.
#[derive(Args)]
struct Common {
    /// TOML config file, or a JSON artifact whose embedded config is reused.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "ATTRACTORS_OUT")]
    out: Option<PathBuf>,
    /// Oracle name (lorenz, van_der_pol, torus, linear_diag, identity) or `nca`.
    #[arg(long, global = true)]
    system: Option<String>,
    /// System parameter, repeatable: `--param rho=28`, `--param diag=2,0.5`.
    #[arg(long = "param", value_name = "KEY=VALUE", global = true)]
    params: Vec<String>,
    /// Shorthand for `--param dim=N`.
    #[arg(long, global = true)]
    dim: Option<usize>,
    /// NCAW weight file; implies `--system nca`.
    #[arg(long, global = true)]
    weights: Option<PathBuf>,
    #[arg(long, global = true)]
    height: Option<usize>,
    #[arg(long, global = true)]
    width: Option<usize>,
    /// Side of the recorded centered crop of NCA substrates (0 = full grid).
    #[arg(long, global = true)]
    crop: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Burn-in steps for the selected subcommand.
    #[arg(long, global = true)]
    burn_in: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve a system and record its trajectory.
    Simulate {
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        record_every: Option<usize>,
        /// csv, atrj or both.
        #[arg(long)]
        format: Option<String>,
        /// Write the final NCA state as an RGBA image.
        #[arg(long)]
        png: bool,
    },
    /// Lyapunov spectrum and sign classification.
    Lyapunov {
        #[command(flatten)]
        lyap: LyapunovArgs,
    },
    /// Power spectrum, peak filtering and spectral classification.
    Fourier {
        #[command(flatten)]
        fourier: FourierArgs,
    },
    /// Principal components of a recorded trajectory.
    Pca {
        #[command(flatten)]
        pca: PcaArgs,
    },
    /// Volume proxy trend over consecutive windows.
    Volume {
        #[arg(long)]
        total_steps: Option<usize>,
        #[arg(long)]
        window: Option<usize>,
    },
    /// Perturbation and recovery batch.
    Perturb {
        #[arg(long, value_enum)]
        kind: Option<KindArg>,
        #[arg(long)]
        noise_std: Option<f64>,
        #[arg(long)]
        radius: Option<usize>,
        /// Damage center as `Y,X`.
        #[arg(long, value_parser = parse_center)]
        center: Option<(usize, usize)>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        tail: Option<usize>,
        #[arg(long)]
        mode_threshold: Option<f64>,
    },
    /// Lyapunov, Fourier and PCA analyses with a combined verdict.
    Classify {
        #[command(flatten)]
        lyap: LyapunovArgs,
        #[command(flatten)]
        fourier: FourierArgs,
        #[command(flatten)]
        pca: PcaArgs,
    },
    /// Attractor summaries for a sequence of training checkpoints.
    Epochs {
        /// NCAW files in epoch order.
        weights: Vec<PathBuf>,
        #[arg(long)]
        record: Option<usize>,
        #[arg(long)]
        lyapunov_steps: Option<usize>,
    },
    /// Render CSV/JSON artifacts as SVG.
    Plot { inputs: Vec<PathBuf> },
}

#[derive(Args)]
struct LyapunovArgs {
    /// Accumulation steps of the Lyapunov estimate.
    #[arg(long)]
    lyapunov_steps: Option<usize>,
    #[arg(long)]
    n_exponents: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Zero threshold for sign classification, in report units.
    #[arg(long)]
    theta: Option<f64>,
}

#[derive(Args)]
struct FourierArgs {
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    min_power: Option<f64>,
    /// Peak matching tolerance in frequency units.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_coeff: Option<i64>,
    #[arg(long, value_enum)]
    window_fn: Option<WindowArg>,
}

#[derive(Args)]
struct PcaArgs {
    /// Number of recorded states the PCA is fitted on.
    #[arg(long)]
    pca_samples: Option<usize>,
    #[arg(long)]
    components: Option<usize>,
    /// Cumulative variance target for the intrinsic dimension.
    #[arg(long)]
    tau: Option<f64>,
    /// Standard-scale before fitting.
    #[arg(long)]
    scaled: bool,
    /// Interval boundaries for separate fits, e.g. `200,400`.
    #[arg(long, value_delimiter = ',')]
    intervals: Option<Vec<usize>>,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    SmallNoise,
    CircleDamage,
}

#[derive(Clone, Copy, ValueEnum)]
enum WindowArg {
    None,
    Hann,
}

fn parse_center(s: &str) -> Result<(usize, usize), String> {
    let (y, x) = s.split_once(',').ok_or("expected Y,X")?;
    Ok((
        y.trim().parse().map_err(|_| "bad Y")?,
        x.trim().parse().map_err(|_| "bad X")?,
    ))
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl LyapunovArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        let l = &mut cfg.lyapunov;
        set(&mut l.steps, self.lyapunov_steps);
        set(&mut l.epsilon, self.epsilon);
        if self.n_exponents.is_some() {
            l.n_exponents = self.n_exponents;
        }
        if self.theta.is_some() {
            l.theta = self.theta;
        }
    }
}

impl FourierArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        let f = &mut cfg.fourier;
        set(&mut f.samples, self.samples);
        set(&mut f.min_power, self.min_power);
        set(&mut f.max_coeff, self.max_coeff);
        if self.tol.is_some() {
            f.tol = self.tol;
        }
        if let Some(w) = self.window_fn {
            f.window = match w {
                WindowArg::None => Window::None,
                WindowArg::Hann => Window::Hann,
            };
        }
    }
}

impl PcaArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        let p = &mut cfg.pca;
        set(&mut p.samples, self.pca_samples);
        set(&mut p.components, self.components);
        set(&mut p.tau, self.tau);
        set(&mut p.intervals, self.intervals.clone());
        p.scaled |= self.scaled;
    }
}

/// Defaults, then the config file, then flags.
fn resolve(common: Common, command: &Command) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if common.out.is_some() {
        cfg.out_dir = common.out;
    }
    if let Some(name) = common.system {
        if name != cfg.system.name {
            cfg.system.params.clear();
        }
        cfg.system.name = name;
    }
    for p in &common.params {
        let (k, v) = parse_param(p)?;
        cfg.system.params.insert(k, v);
    }
    if let Some(d) = common.dim {
        cfg.system.params.insert("dim".into(), attractors_core::ParamValue::Scalar(d as f64));
    }
    if common.weights.is_some() {
        cfg.system.name = "nca".into();
        cfg.system.weights = common.weights;
    }
    if common.height.is_some() {
        cfg.system.height = common.height;
    }
    if common.width.is_some() {
        cfg.system.width = common.width;
    }
    set(&mut cfg.system.crop, common.crop);
    set(&mut cfg.seed, common.seed);

    let burn = common.burn_in;
    match command {
        Command::Simulate {
            steps,
            record_every,
            format,
            png,
        } => {
            let s = &mut cfg.simulate;
            set(&mut s.burn_in, burn);
            set(&mut s.steps, *steps);
            set(&mut s.record_every, *record_every);
            set(&mut s.format, format.clone());
            s.png |= *png;
        }
        Command::Lyapunov { lyap } => {
            set(&mut cfg.lyapunov.burn_in, burn);
            lyap.apply(&mut cfg);
        }
        Command::Fourier { fourier } => {
            set(&mut cfg.fourier.burn_in, burn);
            fourier.apply(&mut cfg);
        }
        Command::Pca { pca } => {
            set(&mut cfg.pca.burn_in, burn);
            pca.apply(&mut cfg);
        }
        Command::Volume { total_steps, window } => {
            let v = &mut cfg.volume;
            set(&mut v.burn_in, burn);
            set(&mut v.total_steps, *total_steps);
            set(&mut v.window, *window);
        }
        Command::Perturb {
            kind,
            noise_std,
            radius,
            center,
            runs,
            steps,
            tail,
            mode_threshold,
        } => {
            let p = &mut cfg.perturb;
            set(&mut p.burn_in, burn);
            if let Some(k) = *kind {
                p.kind = match k {
                    KindArg::SmallNoise => PerturbationKind::SmallNoise,
                    KindArg::CircleDamage => PerturbationKind::CircleDamage,
                };
            }
            set(&mut p.noise_std, *noise_std);
            set(&mut p.circle_radius, *radius);
            if center.is_some() {
                p.circle_center = *center;
            }
            set(&mut p.runs, *runs);
            set(&mut p.steps, *steps);
            set(&mut p.tail, *tail);
            set(&mut p.mode_threshold, *mode_threshold);
        }
        Command::Classify { lyap, fourier, pca } => {
            // One burn-in flag sets all three analyses.
            if let Some(b) = burn {
                cfg.lyapunov.burn_in = b;
                cfg.fourier.burn_in = b;
                cfg.pca.burn_in = b;
            }
            lyap.apply(&mut cfg);
            fourier.apply(&mut cfg);
            pca.apply(&mut cfg);
        }
        Command::Epochs {
            record,
            lyapunov_steps,
            ..
        } => {
            let e = &mut cfg.epochs;
            set(&mut e.burn_in, burn);
            set(&mut e.record, *record);
            set(&mut e.lyapunov_steps, *lyapunov_steps);
        }
        Command::Plot { .. } => {}
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<serde_json::Value, CliError> {
    let command = cli.command;
    let cfg = resolve(cli.common, &command)?;
    match command {
        Command::Simulate { .. } => commands::simulate(&cfg),
        Command::Lyapunov { .. } => commands::lyapunov(&cfg),
        Command::Fourier { .. } => commands::fourier(&cfg),
        Command::Pca { .. } => commands::pca(&cfg),
        Command::Volume { .. } => commands::volume(&cfg),
        Command::Perturb { .. } => commands::perturb(&cfg),
        Command::Classify { .. } => commands::classify(&cfg),
        Command::Epochs { weights, .. } => commands::epochs(&cfg, &weights),
        Command::Plot { inputs } => commands::plot(&cfg, &inputs),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
