//! Command-line front end. `run` returns the process exit code:
//! 0 success, 1 runtime failure, 2 usage error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::diagnostics::{diagnostics_csv, run_diagnostics, DiagnoseSpec};
use crate::error::{Error, Result};
use crate::experiment::{write_experiment, ExperimentSpec, Provenance, PROVENANCE_FILE, WORKERS_ENV};
use crate::optimizer::{OptimizerConfig, StepRule};
use crate::robust_loss::RobustConfig;
use crate::series::TimeSeriesMatrix;
use crate::simulate::{simulate_retrying, DgpSpec, NoiseSpec, DEFAULT_BURN_IN};
use crate::var::{fit_var, FitConfig, LambdaMode, VarModel};

#[derive(Debug, Parser)]
#[command(name = "robvar", version, about = "Robust sparse VAR estimation and simulation studies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a path from a process spec (JSON) or a VAR model CSV.
    Simulate(SimulateArgs),
    /// Fit a robust sparse VAR to a series CSV and write the coefficients.
    Fit(FitArgs),
    /// Run a replicated simulation study.
    Experiment(ExperimentArgs),
    /// Check the deviation and restricted-eigenvalue conditions.
    Diagnose(DiagnoseArgs),
    /// Report the companion spectral radius of a VAR model CSV.
    CheckStability(StabilityArgs),
    /// Print a named experiment preset as JSON.
    Preset(PresetArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Process spec (JSON).
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    spec: Option<PathBuf>,
    /// VAR coefficients (CSV), simulated with Student-t noise.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Degrees of freedom of the noise when `--model` is used.
    #[arg(long, default_value_t = 3.0)]
    df: f64,
    /// Number of rows to keep.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    burn_in: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    max_attempts: usize,
    #[arg(long)]
    output: PathBuf,
    /// Defaults to `<output>.provenance.json`.
    #[arg(long)]
    provenance: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LambdaKind {
    Theory,
    Explicit,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 1)]
    lag: usize,
    #[arg(long)]
    tau: f64,
    #[arg(long, default_value_t = 3.0)]
    b: f64,
    #[arg(long, value_enum, default_value_t = LambdaKind::Theory)]
    lambda_mode: LambdaKind,
    /// Rate constant for theory mode.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Penalty level for explicit mode.
    #[arg(long, required_if_eq("lambda_mode", "explicit"))]
    lambda: Option<f64>,
    /// Fixed step size; `safe` uses 0.99 over the Lipschitz bound.
    #[arg(long, default_value = "0.9")]
    step: String,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Coefficient CSV; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    provenance: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// Experiment spec (JSON).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    spec: Option<PathBuf>,
    /// Named preset instead of a spec file.
    #[arg(long)]
    preset: Option<String>,
    /// Overrides the spec's output directory (default `results`).
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Worker threads (the environment variable takes precedence).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct DiagnoseArgs {
    /// Diagnostics spec (JSON).
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    provenance: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct StabilityArgs {
    #[arg(long)]
    model: PathBuf,
    /// Defaults to `<model>.stability.provenance.json`.
    #[arg(long)]
    provenance: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PresetArgs {
    name: String,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{what} {}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn simulate_cmd(a: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let (dgp, source) = match (&a.spec, &a.model) {
        (Some(p), _) => (read_json::<DgpSpec>(p, "process spec")?, p),
        (None, Some(p)) => (DgpSpec::var_t(VarModel::read_csv(p)?, NoiseSpec::student_t(a.df)?)?, p),
        (None, None) => unreachable!("clap enforces one source"),
    };
    let (ts, attempts) = simulate_retrying(&dgp, a.n, a.burn_in, a.seed, a.max_attempts)?;
    ts.write_csv(&a.output)?;
    let mut prov = Provenance::new(
        "simulate",
        a.seed,
        json!({
            "process": dgp,
            "source": source,
            "n": a.n,
            "burn_in": a.burn_in,
            "max_attempts": a.max_attempts,
        }),
    );
    prov.outputs.push(a.output.display().to_string());
    if attempts > 1 {
        prov.notes.push(format!("explosive paths retried; stream {} used", attempts - 1));
    }
    prov.write(a.provenance.clone().unwrap_or_else(|| sibling(&a.output, ".provenance.json")))?;
    let _ = writeln!(out, "wrote {} ({}x{})", a.output.display(), ts.n(), ts.p());
    Ok(())
}

fn fit_cmd(a: &FitArgs, out: &mut dyn Write) -> Result<()> {
    let data = TimeSeriesMatrix::read_csv(&a.input)?;
    let lambda = match a.lambda_mode {
        LambdaKind::Theory => LambdaMode::Theory(a.c),
        LambdaKind::Explicit => LambdaMode::Explicit(a.lambda.expect("clap requires --lambda")),
    };
    let step = if a.step == "safe" {
        StepRule::Safe
    } else {
        StepRule::Fixed(
            a.step
                .parse()
                .map_err(|_| Error::Config(format!("step must be a number or `safe`, got {:?}", a.step)))?,
        )
    };
    let cfg = FitConfig {
        opt: OptimizerConfig {
            step,
            tol: a.tol,
            max_iter: a.max_iter,
            seed: a.seed,
            record_trace: false,
        },
        ..FitConfig::new(RobustConfig::new(a.tau, a.b)?, lambda)
    };
    let fit = fit_var(&data, a.lag, &cfg)?;
    let csv = fit.model.to_csv();
    let mut prov = Provenance::new(
        "fit",
        a.seed,
        json!({ "input": a.input, "lag": a.lag, "config": cfg }),
    );
    prov.lambda_mode = Some(lambda);
    prov.notes.push(format!("lambda={:e}", fit.lambda));
    if !fit.all_converged() {
        let bad: Vec<usize> = (0..fit.fits.len()).filter(|&j| !fit.fits[j].converged).collect();
        log::warn!("columns {bad:?} hit max_iter before converging");
        prov.notes.push(format!("not converged: columns {bad:?}"));
    }
    let exceeded = fit.fits.iter().filter(|f| f.step > f.step_bound).count();
    if exceeded > 0 {
        log::warn!("{exceeded} columns used a step above 1/L");
        prov.notes.push(format!("{exceeded} columns used a step above 1/L"));
    }
    let prov_path = match (&a.provenance, &a.output) {
        (Some(p), _) => p.clone(),
        (None, Some(o)) => sibling(o, ".provenance.json"),
        (None, None) => PathBuf::from("robvar-fit.provenance.json"),
    };
    match &a.output {
        Some(path) => {
            write_text(path, &csv)?;
            prov.outputs.push(path.display().to_string());
        }
        None => {
            let _ = out.write_all(csv.as_bytes());
            prov.outputs.push("stdout".into());
        }
    }
    prov.write(prov_path)
}

fn experiment_cmd(a: &ExperimentArgs, out: &mut dyn Write) -> Result<()> {
    let mut spec = match (&a.spec, &a.preset) {
        (Some(p), _) => ExperimentSpec::read(p)?,
        (None, Some(name)) => ExperimentSpec::preset(name)?,
        (None, None) => unreachable!("clap enforces one source"),
    };
    if let Some(w) = a.workers {
        spec.workers = Some(w);
    }
    let dir = a
        .output_dir
        .clone()
        .or_else(|| spec.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("results"));
    spec.output_dir = Some(dir.clone());
    spec.validate()?;
    let result = write_experiment(&spec, &dir)?;
    let _ = writeln!(
        out,
        "wrote {} rows ({} missing) to {}",
        result.table.rows.len(),
        result.table.missing.len(),
        dir.display()
    );
    if std::env::var_os(WORKERS_ENV).is_some() {
        log::info!("worker count taken from {WORKERS_ENV}");
    }
    log::info!("provenance in {}", dir.join(PROVENANCE_FILE).display());
    Ok(())
}

fn diagnose_cmd(a: &DiagnoseArgs, out: &mut dyn Write) -> Result<()> {
    let spec: DiagnoseSpec = read_json(&a.spec, "diagnostics spec")?;
    let rows = run_diagnostics(&spec)?;
    write_text(&a.output, &diagnostics_csv(&rows))?;
    let pass = rows.iter().filter(|r| r.deviation_pass).count() as f64 / rows.len() as f64;
    let mut prov = Provenance::new("diagnose", spec.seed, serde_json::to_value(&spec).expect("spec serializes"));
    prov.lambda_mode = Some(LambdaMode::Theory(spec.c));
    prov.outputs.push(a.output.display().to_string());
    prov.write(a.provenance.clone().unwrap_or_else(|| sibling(&a.output, ".provenance.json")))?;
    let _ = writeln!(out, "deviation_pass_rate={pass}");
    Ok(())
}

fn stability_cmd(a: &StabilityArgs, out: &mut dyn Write) -> Result<()> {
    let model = VarModel::read_csv(&a.model)?;
    let radius = model.radius()?;
    let report = format!("radius={radius:.16e} stable={} p={} d={}", radius < 1.0, model.p(), model.d());
    let mut prov = Provenance::new("check-stability", 0, json!({ "model": a.model }));
    prov.notes.push(report.clone());
    prov.write(a.provenance.clone().unwrap_or_else(|| sibling(&a.model, ".stability.provenance.json")))?;
    let _ = writeln!(out, "{report}");
    Ok(())
}

fn preset_cmd(a: &PresetArgs, out: &mut dyn Write) -> Result<()> {
    let text = ExperimentSpec::preset(&a.name)?.to_json() + "\n";
    match &a.output {
        Some(p) => write_text(p, &text),
        None => {
            let _ = out.write_all(text.as_bytes());
            Ok(())
        }
    }
}

/// Parse `args` (including the program name) and execute.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = match &cli.command {
        Command::Simulate(a) => simulate_cmd(a, out),
        Command::Fit(a) => fit_cmd(a, out),
        Command::Experiment(a) => experiment_cmd(a, out),
        Command::Diagnose(a) => diagnose_cmd(a, out),
        Command::CheckStability(a) => stability_cmd(a, out),
        Command::Preset(a) => preset_cmd(a, out),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            let _ = writeln!(err, "error: kind={} message={msg}", e.kind());
            if matches!(e, Error::Parse(_) | Error::Config(_)) {
                let _ = writeln!(err, "see `robvar --help` for usage");
            }
            1
        }
    }
}

pub fn run() -> i32 {
    run_with(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr())
}
