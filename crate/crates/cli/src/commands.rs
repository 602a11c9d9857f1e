//! One function per subcommand. Each writes its artifacts into the output
//! directory and returns a short summary for stdout.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use attractors_core::dynsys::SystemInfo;
use attractors_core::lyapunov::{self, AttractorKind, LyapunovOptions, LyapunovReport};
use attractors_core::nca::load_weights;
use attractors_core::perturb::{self, RecoveryOptions};
use attractors_core::reduce::{fit_pca, fit_pca_scaled, intrinsic_dimension, project, volume_proxy, PcaModel};
use attractors_core::spectral::{self, AnalysisOptions, PowerSpectrum, SpectralAnalysis, SpectrumClass, SpectrumOptions};
use attractors_core::{burn_in, evolve_observed, StateVector, SystemHandle, Trajectory};
use serde_json::{json, Map, Value};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::svg;

type Result<T> = std::result::Result<T, CliError>;

/// Files written by one command, in write order.
pub struct Artifacts {
    dir: PathBuf,
    files: Vec<String>,
}

impl Artifacts {
    pub fn create(dir: &Path) -> Result<Artifacts> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::config(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn record(&mut self, name: &str) {
        self.files.push(name.to_string());
    }

    fn text(&mut self, name: &str, content: &str) -> Result<()> {
        fs::write(self.path(name), content)?;
        self.record(name);
        Ok(())
    }

    fn json(&mut self, name: &str, value: &Value) -> Result<()> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.text(name, &s)
    }

    fn csv(
        &mut self,
        name: &str,
        write: impl FnOnce(&mut BufWriter<fs::File>) -> attractors_core::Result<()>,
    ) -> Result<()> {
        let mut w = BufWriter::new(fs::File::create(self.path(name))?);
        write(&mut w)?;
        w.flush()?;
        self.record(name);
        Ok(())
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }
}

/// Common head of every JSON artifact.
fn envelope(command: &str, cfg: &RunConfig, sys: Option<&SystemHandle>) -> Result<Map<String, Value>> {
    let mut m = Map::new();
    m.insert("command".into(), json!(command));
    m.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    m.insert("config".into(), serde_json::to_value(cfg)?);
    if let Some(sys) = sys {
        m.insert("system".into(), serde_json::to_value(SystemInfo::of(sys.as_ref()))?);
    }
    Ok(m)
}

fn settle(sys: &SystemHandle, steps: usize) -> Result<StateVector> {
    Ok(burn_in(sys.as_ref(), &sys.default_initial_state(), steps)?)
}

/// Records `rows` consecutive observed states starting at `x`.
fn record(cfg: &RunConfig, sys: &SystemHandle, x: &StateVector, rows: usize, every: usize) -> Result<Trajectory> {
    if rows < 2 {
        return Err(CliError::config("need at least 2 recorded samples"));
    }
    let obs = cfg.observation(sys)?;
    Ok(evolve_observed(sys.as_ref(), x, (rows - 1) * every, every, obs)?)
}

// ---- simulate ----

pub fn simulate(cfg: &RunConfig) -> Result<Value> {
    let s = &cfg.simulate;
    let (csv, atrj) = match s.format.as_str() {
        "csv" => (true, false),
        "atrj" => (false, true),
        "both" => (true, true),
        f => return Err(CliError::config(format!("unknown format `{f}` (csv, atrj or both)"))),
    };
    let sys = cfg.build_system()?;
    if s.png && sys.grid().is_none() {
        return Err(CliError::config("png output needs a grid system"));
    }
    let x = settle(&sys, s.burn_in)?;
    let obs = cfg.observation(&sys)?;
    let traj = evolve_observed(sys.as_ref(), &x, s.steps, s.record_every, obs)?;
    let mut out = Artifacts::create(&cfg.out_dir())?;
    if csv {
        out.csv("trajectory.csv", |w| traj.write_csv(w))?;
    }
    if atrj {
        out.csv("trajectory.atrj", |w| traj.write_atrj(w))?;
    }
    if s.png {
        let last = burn_in(sys.as_ref(), &x, s.steps)?;
        let sub = attractors_core::nca::Substrate::from_state(sys.grid().unwrap(), &last)?;
        sub.save_png(out.path("final.png"))?;
        out.record("final.png");
    }
    let mut m = envelope("simulate", cfg, Some(&sys))?;
    m.insert("observation".into(), serde_json::to_value(obs)?);
    m.insert("rows".into(), json!(traj.len()));
    m.insert("observed_dim".into(), json!(traj.dim()));
    m.insert("files".into(), json!(out.files()));
    out.json("simulate.json", &Value::Object(m))?;
    Ok(json!({ "command": "simulate", "rows": traj.len(), "files": out.files() }))
}

// ---- lyapunov ----

fn run_lyapunov(cfg: &RunConfig, sys: &SystemHandle) -> Result<LyapunovReport> {
    let l = &cfg.lyapunov;
    let x = settle(sys, l.burn_in)?;
    let n = l.n_exponents.unwrap_or(sys.dim().min(10));
    let opts = LyapunovOptions {
        epsilon: l.epsilon,
        n_steps: l.steps,
        checkpoint_every: l.checkpoint_every,
        align_steps: l.align_steps,
        seed: cfg.seed,
        theta: l.theta,
    };
    Ok(lyapunov::spectrum(sys.as_ref(), &x, n, &opts)?)
}

fn write_lyapunov(out: &mut Artifacts, cfg: &RunConfig, sys: &SystemHandle, report: &LyapunovReport) -> Result<()> {
    out.csv("lyapunov.csv", |w| report.write_csv(w))?;
    let xs: Vec<f64> = report.checkpoints.iter().map(|&c| c as f64).collect();
    out.text(
        "lyapunov.svg",
        &svg::curves(&format!("Lyapunov exponents: {}", report.system), "step", &xs, &report.running_means),
    )?;
    let mut m = envelope("lyapunov", cfg, Some(sys))?;
    m.insert("theta".into(), json!(report.theta()));
    m.insert("kind".into(), json!(report.classification.kind));
    m.insert("report".into(), serde_json::to_value(report)?);
    out.json("lyapunov.json", &Value::Object(m))
}

pub fn lyapunov(cfg: &RunConfig) -> Result<Value> {
    let sys = cfg.build_system()?;
    let report = run_lyapunov(cfg, &sys)?;
    let mut out = Artifacts::create(&cfg.out_dir())?;
    write_lyapunov(&mut out, cfg, &sys, &report)?;
    Ok(json!({
        "command": "lyapunov",
        "exponents": report.exponents,
        "unit": report.unit,
        "theta": report.theta(),
        "kind": report.classification.kind,
        "files": out.files(),
    }))
}

// ---- fourier ----

fn analysis_options(cfg: &RunConfig) -> AnalysisOptions {
    let f = &cfg.fourier;
    AnalysisOptions {
        min_power: f.min_power,
        tol: f.tol,
        max_coeff: f.max_coeff,
        broadband_threshold: f.broadband_fraction,
    }
}

fn run_fourier(cfg: &RunConfig, sys: &SystemHandle) -> Result<(PowerSpectrum, SpectralAnalysis)> {
    let f = &cfg.fourier;
    let x = settle(sys, f.burn_in)?;
    let traj = record(cfg, sys, &x, f.samples, f.record_every)?;
    let opts = SpectrumOptions {
        detrend: f.detrend,
        window: f.window,
        time_per_step: sys.time_step().unwrap_or(1.0),
    };
    let spec = spectral::power_spectrum(&traj, &opts)?;
    let analysis = spectral::analyze(&spec, &analysis_options(cfg))?;
    Ok((spec, analysis))
}

fn write_fourier(
    out: &mut Artifacts,
    cfg: &RunConfig,
    sys: &SystemHandle,
    spec: &PowerSpectrum,
    analysis: &SpectralAnalysis,
) -> Result<()> {
    out.csv("spectrum.csv", |w| spec.write_csv(w))?;
    let bases = analysis.base_frequencies();
    out.text(
        "spectrum.svg",
        &svg::spectrum(&format!("Power spectrum: {}", sys.name()), &spec.freqs, &spec.power, &bases),
    )?;
    let mut m = envelope("fourier", cfg, Some(sys))?;
    m.insert("classification".into(), json!(analysis.classification));
    m.insert("base_frequencies".into(), json!(bases));
    m.insert("outside_fraction".into(), json!(analysis.outside_fraction));
    m.insert("tolerance".into(), json!(analysis.peaks.tolerance));
    m.insert("n_samples".into(), json!(spec.n_samples));
    m.insert("resolution".into(), json!(spec.resolution()));
    m.insert("nyquist".into(), json!(spec.nyquist()));
    m.insert("scale".into(), json!(spec.scale));
    m.insert("peaks".into(), serde_json::to_value(&analysis.peaks.peaks)?);
    out.json("spectrum.json", &Value::Object(m))
}

pub fn fourier(cfg: &RunConfig) -> Result<Value> {
    let sys = cfg.build_system()?;
    let (spec, analysis) = run_fourier(cfg, &sys)?;
    let mut out = Artifacts::create(&cfg.out_dir())?;
    write_fourier(&mut out, cfg, &sys, &spec, &analysis)?;
    Ok(json!({
        "command": "fourier",
        "classification": analysis.classification,
        "base_frequencies": analysis.base_frequencies(),
        "outside_fraction": analysis.outside_fraction,
        "files": out.files(),
    }))
}

// ---- pca ----

struct PcaFit {
    start: usize,
    end: usize,
    model: PcaModel,
    projected: Trajectory,
    intrinsic: std::result::Result<usize, String>,
}

fn slice(traj: &Trajectory, a: usize, b: usize) -> Result<Trajectory> {
    let d = traj.dim();
    Ok(Trajectory::from_flat(
        traj.as_flat()[a * d..b * d].to_vec(),
        d,
        traj.t_start() + a as i64,
        traj.dt(),
    )?)
}

fn run_pca(cfg: &RunConfig, sys: &SystemHandle) -> Result<Vec<PcaFit>> {
    let p = &cfg.pca;
    let x = settle(sys, p.burn_in)?;
    let traj = record(cfg, sys, &x, p.samples, 1)?;
    let mut bounds = vec![0];
    bounds.extend(p.intervals.iter().copied());
    bounds.push(traj.len());
    if bounds.windows(2).any(|w| w[1] < w[0] + 2) {
        return Err(CliError::config(format!(
            "pca intervals must increase by at least 2 and lie inside 0..{}",
            traj.len()
        )));
    }
    bounds
        .windows(2)
        .map(|w| {
            let part = slice(&traj, w[0], w[1])?;
            let r = p.components.min(part.len() - 1).min(part.dim());
            let model = if p.scaled {
                fit_pca_scaled(&part, r)?
            } else {
                fit_pca(&part, r)?
            };
            let projected = project(&model, &part)?;
            let intrinsic = intrinsic_dimension(&model, p.tau).map_err(|e| e.to_string());
            Ok(PcaFit {
                start: w[0],
                end: w[1],
                model,
                projected,
                intrinsic,
            })
        })
        .collect()
}

fn write_pca(out: &mut Artifacts, cfg: &RunConfig, sys: &SystemHandle, fits: &[PcaFit]) -> Result<Value> {
    let single = fits.len() == 1;
    let mut summaries = Vec::new();
    for (i, fit) in fits.iter().enumerate() {
        let suffix = if single { String::new() } else { format!("_{i}") };
        let model_name = format!("pca_model{suffix}.json");
        fit.model.save(out.path(&model_name))?;
        out.record(&model_name);
        out.record(&format!("{model_name}.bin"));
        out.csv(&format!("projection{suffix}.csv"), |w| fit.projected.write_csv(w))?;
        let rows: Vec<Vec<f64>> = fit.projected.rows().map(|r| r.to_vec()).collect();
        out.text(
            &format!("projection{suffix}.svg"),
            &svg::trajectory(
                &format!("{} samples {}..{}", sys.name(), fit.start, fit.end),
                &svg::planar(&rows),
            ),
        )?;
        let mut s = Map::new();
        s.insert("start".into(), json!(fit.start));
        s.insert("end".into(), json!(fit.end));
        s.insert("n_components".into(), json!(fit.model.n_components()));
        s.insert("explained_variance_ratio".into(), json!(fit.model.explained_variance_ratio));
        s.insert("cumulative_ratio".into(), json!(fit.model.cumulative_ratio));
        match &fit.intrinsic {
            Ok(k) => s.insert("intrinsic_dimension".into(), json!(k)),
            Err(e) => {
                s.insert("intrinsic_dimension".into(), Value::Null);
                s.insert("warning".into(), json!(e))
            }
        };
        s.insert("model".into(), json!(model_name));
        summaries.push(Value::Object(s));
    }
    let mut m = envelope("pca", cfg, Some(sys))?;
    m.insert("tau".into(), json!(cfg.pca.tau));
    m.insert("fits".into(), Value::Array(summaries.clone()));
    out.json("pca.json", &Value::Object(m))?;
    Ok(Value::Array(summaries))
}

pub fn pca(cfg: &RunConfig) -> Result<Value> {
    let sys = cfg.build_system()?;
    let fits = run_pca(cfg, &sys)?;
    let mut out = Artifacts::create(&cfg.out_dir())?;
    let summaries = write_pca(&mut out, cfg, &sys, &fits)?;
    Ok(json!({ "command": "pca", "fits": summaries, "files": out.files() }))
}

// ---- volume ----

pub fn volume(cfg: &RunConfig) -> Result<Value> {
    let v = &cfg.volume;
    let sys = cfg.build_system()?;
    let x = settle(&sys, v.burn_in)?;
    let report = volume_proxy(sys.as_ref(), &x, v.total_steps, v.window)?;
    let mut out = Artifacts::create(&cfg.out_dir())?;
    out.csv("volume.csv", |w| {
        writeln!(w, "window,start,sum")?;
        for (i, (s, v)) in report.starts.iter().zip(&report.sums).enumerate() {
            writeln!(w, "{i},{s},{v}")?;
        }
        Ok(())
    })?;
    let mut m = envelope("volume", cfg, Some(&sys))?;
    m.insert("verdict_text".into(), json!(report.verdict.to_string()));
    m.insert("report".into(), serde_json::to_value(&report)?);
    out.json("volume.json", &Value::Object(m))?;
    Ok(json!({
        "command": "volume",
        "slope": report.slope,
        "mean": report.mean,
        "verdict": report.verdict.to_string(),
        "files": out.files(),
    }))
}

// ---- perturb ----

pub fn perturb(cfg: &RunConfig) -> Result<Value> {
    let p = &cfg.perturb;
    if p.runs == 0 {
        return Err(CliError::config("perturb needs at least one run"));
    }
    if p.tail < 2 {
        return Err(CliError::config("perturb tail must be at least 2"));
    }
    let sys = cfg.build_system()?;
    let x_attr = settle(&sys, p.burn_in)?;
    let observation = cfg.observation(&sys)?;
    let reference = evolve_observed(sys.as_ref(), &x_attr, p.tail, 1, observation)?.tail(p.tail);
    let reference_model = fit_pca_scaled(&reference, 2.min(reference.dim()))?;
    let specs = p.spec(cfg.seed).runs(p.runs);
    let opts = RecoveryOptions {
        steps: p.steps,
        tail: p.tail,
        record_every: p.record_every,
        observation,
        mode_threshold: p.mode_threshold,
    };
    let runs = perturb::batch_perturbation_study(sys.as_ref(), &x_attr, &reference, &reference_model, &specs, &opts);

    let mut out = Artifacts::create(&cfg.out_dir())?;
    let mut failed = 0;
    for run in &runs {
        let Ok((result, projection)) = &run.outcome else {
            failed += 1;
            continue;
        };
        let stem = format!("run_{:03}", run.index);
        out.csv(&format!("{stem}_recovery.csv"), |w| projection.recovery.write_csv(w))?;
        out.csv(&format!("{stem}_reference.csv"), |w| projection.reference.write_csv(w))?;
        let rows: Vec<Vec<f64>> = projection.recovery.rows().map(|r| r.to_vec()).collect();
        out.text(
            &format!("{stem}.svg"),
            &svg::trajectory(&format!("{} recovery run {}", sys.name(), run.index), &svg::planar(&rows)),
        )?;
        let mut m = envelope("perturb", cfg, Some(&sys))?;
        m.insert("index".into(), json!(run.index));
        m.insert("spec".into(), serde_json::to_value(run.spec)?);
        m.insert("refit_basis".into(), json!(projection.refit));
        m.insert("summary".into(), serde_json::to_value(result.summary(&opts))?);
        out.json(&format!("{stem}.json"), &Value::Object(m))?;
    }
    let manifest = perturb::manifest(&runs);
    let mut m = envelope("perturb", cfg, Some(&sys))?;
    m.insert("manifest".into(), serde_json::to_value(&manifest)?);
    out.json("manifest.json", &Value::Object(m))?;
    Ok(json!({
        "command": "perturb",
        "runs": runs.len(),
        "failed": failed,
        "verdicts": manifest.runs.iter().map(|r| json!(r.verdict)).collect::<Vec<_>>(),
        "files": out.files(),
    }))
}

// ---- classify ----

fn spectrum_kind(c: SpectrumClass) -> AttractorKind {
    match c {
        SpectrumClass::FixedPointLike => AttractorKind::FixedPoint,
        SpectrumClass::Periodic => AttractorKind::LimitCycle,
        SpectrumClass::QuasiPeriodic(k) => AttractorKind::QuasiPeriodic(k),
        // The spectrum cannot count positive exponents.
        SpectrumClass::BroadbandChaotic => AttractorKind::Chaotic(0),
    }
}

/// Combined verdict and any warnings about disagreement.
pub fn combine(lyap: AttractorKind, spec: SpectrumClass) -> (AttractorKind, Vec<String>) {
    let agree = match (lyap, spectrum_kind(spec)) {
        (AttractorKind::Chaotic(_), AttractorKind::Chaotic(_)) => true,
        (a, b) => a == b,
    };
    if lyap == AttractorKind::Inconclusive {
        let w = format!("Lyapunov classification is inconclusive (spectrum says {spec})");
        (AttractorKind::Inconclusive, vec![w])
    } else if agree {
        (lyap, Vec::new())
    } else {
        let w = format!("Lyapunov spectrum says {lyap} but power spectrum says {spec}");
        (AttractorKind::Inconclusive, vec![w])
    }
}

pub fn classify(cfg: &RunConfig) -> Result<Value> {
    let sys = cfg.build_system()?;
    let report = run_lyapunov(cfg, &sys)?;
    let (spec, analysis) = run_fourier(cfg, &sys)?;
    let fits = run_pca(cfg, &sys)?;

    let mut out = Artifacts::create(&cfg.out_dir())?;
    write_lyapunov(&mut out, cfg, &sys, &report)?;
    write_fourier(&mut out, cfg, &sys, &spec, &analysis)?;
    let pca_summaries = write_pca(&mut out, cfg, &sys, &fits)?;

    let (verdict, mut warnings) = combine(report.classification.kind, analysis.classification);
    for s in pca_summaries.as_array().into_iter().flatten() {
        if let Some(w) = s.get("warning").and_then(Value::as_str) {
            warnings.push(format!("PCA: {w}"));
        }
    }
    let mut m = envelope("classify", cfg, Some(&sys))?;
    m.insert(
        "lyapunov".into(),
        json!({
            "kind": report.classification.kind,
            "exponents": report.exponents,
            "theta": report.theta(),
            "unit": report.unit,
            "n_steps": report.n_steps,
        }),
    );
    m.insert(
        "spectrum".into(),
        json!({
            "classification": analysis.classification,
            "base_frequencies": analysis.base_frequencies(),
            "outside_fraction": analysis.outside_fraction,
            "min_power": cfg.fourier.min_power,
        }),
    );
    m.insert("pca".into(), json!({ "tau": cfg.pca.tau, "fits": pca_summaries }));
    m.insert("verdict".into(), json!(verdict));
    m.insert("warnings".into(), json!(warnings));
    m.insert("files".into(), json!(out.files()));
    out.json("classify.json", &Value::Object(m))?;
    Ok(json!({
        "command": "classify",
        "lyapunov": report.classification.kind,
        "spectrum": analysis.classification,
        "verdict": verdict,
        "warnings": warnings,
        "files": out.files(),
    }))
}

// ---- epochs ----

struct EpochResult {
    label: Value,
    lambda_1: f64,
    projected: Trajectory,
}

fn run_epoch(cfg: &RunConfig, path: &Path) -> Result<EpochResult> {
    let e = &cfg.epochs;
    let mut c = cfg.clone();
    c.system.name = "nca".into();
    c.system.params.clear();
    c.system.weights = Some(path.to_path_buf());
    let label = load_weights(path)?.metadata().get("epoch").cloned().unwrap_or(Value::Null);
    let sys = c.build_system()?;
    let x = settle(&sys, e.burn_in)?;
    let traj = evolve_observed(sys.as_ref(), &x, e.record, 1, c.observation(&sys)?)?.tail(e.record);
    let model = fit_pca_scaled(&traj, 2.min(traj.len() - 1).min(traj.dim()))?;
    let projected = project(&model, &traj)?;
    let opts = LyapunovOptions {
        epsilon: cfg.lyapunov.epsilon,
        n_steps: e.lyapunov_steps,
        checkpoint_every: cfg.lyapunov.checkpoint_every,
        align_steps: cfg.lyapunov.align_steps,
        seed: cfg.seed,
        theta: cfg.lyapunov.theta,
    };
    let (lambda_1, _) = lyapunov::top_exponent(sys.as_ref(), &x, &opts)?;
    Ok(EpochResult {
        label,
        lambda_1,
        projected,
    })
}

pub fn epochs(cfg: &RunConfig, weights: &[PathBuf]) -> Result<Value> {
    if weights.is_empty() {
        return Err(CliError::config("epochs needs at least one weight file"));
    }
    if cfg.epochs.record < 3 {
        return Err(CliError::config("epochs.record must be at least 3"));
    }
    let mut out = Artifacts::create(&cfg.out_dir())?;
    let mut table = Vec::new();
    for (i, path) in weights.iter().enumerate() {
        let entry = match run_epoch(cfg, path) {
            Ok(r) => {
                let stem = format!("epoch_{i:03}");
                out.csv(&format!("{stem}.csv"), |w| r.projected.write_csv(w))?;
                let rows: Vec<Vec<f64>> = r.projected.rows().map(|r| r.to_vec()).collect();
                out.text(
                    &format!("{stem}.svg"),
                    &svg::trajectory(&format!("epoch {}", path.display()), &svg::planar(&rows)),
                )?;
                json!({ "index": i, "weights": path, "epoch": r.label, "lambda_1": r.lambda_1 })
            }
            Err(e) => json!({ "index": i, "weights": path, "error": e.to_string() }),
        };
        table.push(entry);
    }
    out.csv("epochs.csv", |w| {
        writeln!(w, "index,weights,epoch,lambda_1,error")?;
        for t in &table {
            let field = |k: &str| match &t[k] {
                Value::Null => String::new(),
                Value::String(s) => s.replace([',', '\n'], " "),
                v => v.to_string(),
            };
            writeln!(
                w,
                "{},{},{},{},{}",
                field("index"),
                field("weights"),
                field("epoch"),
                field("lambda_1"),
                field("error")
            )?;
        }
        Ok(())
    })?;
    let mut m = envelope("epochs", cfg, None)?;
    m.insert("epochs".into(), Value::Array(table.clone()));
    out.json("epochs.json", &Value::Object(m))?;
    Ok(json!({ "command": "epochs", "epochs": table, "files": out.files() }))
}

// ---- plot ----

fn render(path: &Path) -> Result<String> {
    let bad = |msg: &str| CliError::config(format!("{}: {msg}", path.display()));
    let title = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let file = fs::File::open(path).map_err(|e| bad(&e.to_string()))?;
    if path.extension().is_some_and(|e| e == "json") {
        let v: Value = serde_json::from_reader(BufReader::new(file)).map_err(|e| bad(&e.to_string()))?;
        let report = v.get("report").unwrap_or(&v);
        let (Some(steps), Some(means)) = (report.get("checkpoints"), report.get("running_means")) else {
            return Err(bad("no exponent history (checkpoints, running_means)"));
        };
        let xs: Vec<f64> = serde_json::from_value(steps.clone()).map_err(|e| bad(&e.to_string()))?;
        let series: Vec<Vec<f64>> = serde_json::from_value(means.clone()).map_err(|e| bad(&e.to_string()))?;
        if series.iter().any(|s| s.len() != xs.len()) {
            return Err(bad("running means and checkpoints differ in length"));
        }
        return Ok(svg::curves(&title, "step", &xs, &series));
    }
    let mut reader = BufReader::new(file);
    let mut header = String::new();
    reader.read_line(&mut header)?;
    let header = header.trim_end().to_string();
    if header.starts_with("t,") {
        let file = fs::File::open(path)?;
        let traj = Trajectory::read_csv(BufReader::new(file))?;
        let rows: Vec<Vec<f64>> = traj.rows().map(|r| r.to_vec()).collect();
        return Ok(svg::trajectory(&title, &svg::planar(&rows)));
    }
    let columns = read_columns(reader, header.split(',').count()).map_err(|e| bad(&e))?;
    match header.as_str() {
        "freq,power" => {
            if columns[0].len() < 3 {
                return Err(bad("spectrum needs at least 3 bins"));
            }
            let spec = PowerSpectrum {
                freqs: columns[0].clone(),
                power: columns[1].clone(),
                scale: 1.0,
                n_samples: 2 * (columns[0].len() - 1),
                detrended: true,
                window: spectral::Window::None,
            };
            let analysis = spectral::analyze(&spec, &AnalysisOptions::default())?;
            Ok(svg::spectrum(&title, &spec.freqs, &spec.power, &analysis.base_frequencies()))
        }
        "window,start,sum" => Ok(svg::curves(&title, "step", &columns[1], &columns[2..])),
        h if h.starts_with("step,lambda_") => Ok(svg::curves(&title, "step", &columns[0], &columns[1..])),
        _ => Err(bad(&format!("unrecognized header `{header}`"))),
    }
}

fn read_columns(reader: impl BufRead, n: usize) -> std::result::Result<Vec<Vec<f64>>, String> {
    let mut cols = vec![Vec::new(); n];
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| e.to_string())?;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != n {
            return Err(format!("line {}: expected {n} fields", i + 2));
        }
        for (c, f) in cols.iter_mut().zip(fields) {
            c.push(f.parse().map_err(|_| format!("line {}: bad number `{f}`", i + 2))?);
        }
    }
    if cols[0].is_empty() {
        return Err("no data rows".into());
    }
    Ok(cols)
}

pub fn plot(cfg: &RunConfig, inputs: &[PathBuf]) -> Result<Value> {
    if inputs.is_empty() {
        return Err(CliError::config("plot needs at least one input file"));
    }
    // Render everything first so a bad input leaves no partial output.
    let mut rendered: Vec<(String, String)> = Vec::new();
    for p in inputs {
        let stem = p
            .file_stem()
            .ok_or_else(|| CliError::config(format!("{}: no file name", p.display())))?
            .to_string_lossy();
        let mut name = format!("{stem}.svg");
        if rendered.iter().any(|(n, _)| *n == name) {
            let ext = p.extension().map(|e| e.to_string_lossy()).unwrap_or_default();
            name = format!("{stem}_{ext}.svg");
        }
        if rendered.iter().any(|(n, _)| *n == name) {
            return Err(CliError::config(format!("{}: output name {name} already used", p.display())));
        }
        rendered.push((name, render(p)?));
    }
    let mut out = Artifacts::create(&cfg.out_dir())?;
    for (name, svg) in &rendered {
        out.text(name, svg)?;
    }
    Ok(json!({ "command": "plot", "files": out.files() }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdicts_combine() {
        use AttractorKind::*;
        assert_eq!(combine(Chaotic(1), SpectrumClass::BroadbandChaotic), (Chaotic(1), vec![]));
        assert_eq!(combine(QuasiPeriodic(2), SpectrumClass::QuasiPeriodic(2)).0, QuasiPeriodic(2));
        assert_eq!(combine(LimitCycle, SpectrumClass::Periodic).0, LimitCycle);
        let (v, w) = combine(QuasiPeriodic(4), SpectrumClass::FixedPointLike);
        assert_eq!(v, Inconclusive);
        assert_eq!(w.len(), 1);
        assert_eq!(combine(Inconclusive, SpectrumClass::Periodic).1.len(), 1);
    }
}
