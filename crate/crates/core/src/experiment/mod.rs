//! Replicated simulation studies: estimation error of the robust VAR
//! estimator across grids of noise tail index, sample size and
//! robustification level.

mod svg;
mod table;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::CALIBRATED_C;
use crate::error::{Error, Result};
use crate::numeric::{derive_seed, RNG_ALGORITHM};
use crate::optimizer::OptimizerConfig;
use crate::robust_loss::RobustConfig;
use crate::simulate::{gen_er_transition_with, simulate_retrying, DgpSpec, EdgeWeights, NoiseSpec, DEFAULT_BURN_IN};
use crate::var::{estimation_error, fit_var, FitConfig, LambdaMode, VarModel};

pub use svg::{emit_svg_lines, render_svg_lines, Field};
pub use table::{summarize, summary_csv, CellSummary, MissingCell, ResultRow, ResultsTable, CSV_HEADER};

/// Environment variable overriding the worker count of a run.
pub const WORKERS_ENV: &str = "ROBVAR_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Case {
    Case1DfSweep,
    Case2NSweep,
    Case3NSweepFixedTau,
    Custom,
}

impl Case {
    pub fn as_str(self) -> &'static str {
        match self {
            Case::Case1DfSweep => "case1_df_sweep",
            Case::Case2NSweep => "case2_n_sweep",
            Case::Case3NSweepFixedTau => "case3_n_sweep_fixed_tau",
            Case::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "case1_df_sweep" => Case::Case1DfSweep,
            "case2_n_sweep" => Case::Case2NSweep,
            "case3_n_sweep_fixed_tau" => Case::Case3NSweepFixedTau,
            "custom" => Case::Custom,
            other => return Err(Error::Parse(format!("unknown case {other:?}"))),
        })
    }

    /// Natural horizontal axis of the case's figure.
    pub fn x_axis(self) -> Field {
        match self {
            Case::Case1DfSweep => Field::Df,
            _ => Field::N,
        }
    }
}

/// Small (p=10, n=30) or medium (p=30, n=60) system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Size {
    Small,
    Medium,
}

impl Size {
    pub fn p(self) -> usize {
        match self {
            Size::Small => 10,
            Size::Medium => 30,
        }
    }

    pub fn n(self) -> usize {
        match self {
            Size::Small => 30,
            Size::Medium => 60,
        }
    }

    fn n_grid(self) -> Vec<usize> {
        let n = self.n();
        vec![n, 2 * n, 4 * n, 8 * n]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub case: Case,
    pub p: usize,
    /// Regression sample sizes; each path has `n + d` rows.
    pub n_grid: Vec<usize>,
    #[serde(default = "one")]
    pub d: usize,
    pub df_grid: Vec<f64>,
    pub tau_grid: Vec<f64>,
    pub replications: usize,
    #[serde(default = "default_density")]
    pub density: f64,
    #[serde(default = "default_rho")]
    pub rho_target: f64,
    #[serde(default = "default_b")]
    pub b: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "calibrated_lambda")]
    pub lambda_mode: LambdaMode,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default = "default_burn_in")]
    pub burn_in: usize,
    /// Defaults to plain 0/1 adjacency weights.
    #[serde(default = "unit_weights")]
    pub edge_weights: EdgeWeights,
    #[serde(default)]
    pub opt: OptimizerConfig,
    /// Worker threads; `None` uses the rayon default. The environment
    /// variable [`WORKERS_ENV`] takes precedence.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default = "default_retries")]
    pub max_retries: usize,
}

fn one() -> usize {
    1
}
fn default_density() -> f64 {
    0.05
}
fn default_rho() -> f64 {
    0.5
}
fn default_b() -> f64 {
    3.0
}
fn calibrated_lambda() -> LambdaMode {
    LambdaMode::Theory(CALIBRATED_C)
}
fn unit_weights() -> EdgeWeights {
    EdgeWeights::Unit
}
fn default_burn_in() -> usize {
    DEFAULT_BURN_IN
}
fn default_retries() -> usize {
    10
}

impl ExperimentSpec {
    fn base(case: Case, size: Size) -> Self {
        Self {
            case,
            p: size.p(),
            n_grid: vec![size.n()],
            d: 1,
            df_grid: vec![3.0],
            tau_grid: vec![1.0, 10.0],
            replications: 20,
            density: default_density(),
            rho_target: default_rho(),
            b: default_b(),
            seed: 0,
            lambda_mode: calibrated_lambda(),
            output_dir: None,
            burn_in: DEFAULT_BURN_IN,
            edge_weights: EdgeWeights::Unit,
            opt: OptimizerConfig::default(),
            workers: None,
            max_retries: default_retries(),
        }
    }

    /// Tail-index sweep over df = 3, …, 10 at τ ∈ {1, 10}.
    pub fn case1(size: Size) -> Self {
        Self {
            df_grid: (3..=10).map(f64::from).collect(),
            ..Self::base(Case::Case1DfSweep, size)
        }
    }

    /// Heavy-tail end of the tail-index sweep, df ∈ [2.5, 3.5].
    pub fn case1_heavy(size: Size) -> Self {
        Self {
            df_grid: vec![2.5, 2.75, 3.0, 3.25, 3.5],
            ..Self::base(Case::Case1DfSweep, size)
        }
    }

    /// Sample-size sweep at df = 3, τ ∈ {1, 10}, 10 replications.
    pub fn case2(size: Size) -> Self {
        Self {
            n_grid: size.n_grid(),
            replications: 10,
            ..Self::base(Case::Case2NSweep, size)
        }
    }

    /// Sample-size sweep at df = 3, τ ∈ {1, 3}, 20 replications.
    pub fn case3(size: Size) -> Self {
        Self {
            n_grid: size.n_grid(),
            tau_grid: vec![1.0, 3.0],
            ..Self::base(Case::Case3NSweepFixedTau, size)
        }
    }

    /// Named presets accepted on the command line.
    pub fn preset(name: &str) -> Result<Self> {
        Ok(match name {
            "case1_small" => Self::case1(Size::Small),
            "case1_medium" => Self::case1(Size::Medium),
            "case1_heavy_small" => Self::case1_heavy(Size::Small),
            "case1_heavy_medium" => Self::case1_heavy(Size::Medium),
            "case2_small" => Self::case2(Size::Small),
            "case2_medium" => Self::case2(Size::Medium),
            "case3_small" => Self::case3(Size::Small),
            "case3_medium" => Self::case3(Size::Medium),
            other => return Err(Error::Config(format!("unknown preset {other:?}"))),
        })
    }

    pub const PRESETS: [&'static str; 8] = [
        "case1_small",
        "case1_medium",
        "case1_heavy_small",
        "case1_heavy_medium",
        "case2_small",
        "case2_medium",
        "case3_small",
        "case3_medium",
    ];

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.p == 0 {
            return bad("p must be positive".into());
        }
        if self.d == 0 {
            return bad("d must be positive".into());
        }
        if self.n_grid.is_empty() || self.df_grid.is_empty() || self.tau_grid.is_empty() {
            return bad("n_grid, df_grid and tau_grid must be nonempty".into());
        }
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        if let Some(&n) = self.n_grid.iter().find(|&&n| n < 2) {
            return bad(format!("sample sizes must be at least 2, got {n}"));
        }
        if let Some(df) = self.df_grid.iter().find(|&&v| !(v > 2.0 && v.is_finite())) {
            return bad(format!("df must exceed 2, got {df}"));
        }
        if let Some(t) = self.tau_grid.iter().find(|&&v| !(v > 0.0 && v.is_finite())) {
            return bad(format!("tau must be positive, got {t}"));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return bad(format!("density must be in (0, 1], got {}", self.density));
        }
        if !(self.rho_target > 0.0 && self.rho_target < 1.0) {
            return bad(format!("rho_target must be in (0, 1), got {}", self.rho_target));
        }
        if self.workers == Some(0) {
            return bad("workers must be positive".into());
        }
        if self.max_retries == 0 {
            return bad("max_retries must be positive".into());
        }
        RobustConfig::new(self.tau_grid[0], self.b)?;
        self.opt.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| Error::Parse(format!("experiment spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// Worker count after applying the environment override.
    pub fn resolved_workers(&self) -> Result<Option<usize>> {
        match std::env::var(WORKERS_ENV) {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(w) if w > 0 => Ok(Some(w)),
                _ => Err(Error::Config(format!("{WORKERS_ENV} must be a positive integer, got {v:?}"))),
            },
            Err(_) => Ok(self.workers),
        }
    }
}

/// Seed of the transition matrix for replication `rep`; shared by every
/// grid point so the cells differ only in the varied quantity.
pub fn model_seed(seed: u64, rep: usize) -> u64 {
    derive_seed(seed, &[0, rep as u64])
}

/// Seed of the noise path for `(n, df, rep)`. It excludes τ, so all
/// robustification levels are fitted to the same data.
pub fn path_seed(seed: u64, n: usize, df: f64, rep: usize) -> u64 {
    derive_seed(seed, &[1, n as u64, df.to_bits(), rep as u64])
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub table: ResultsTable,
    /// Fits whose fixed step exceeded `1/L` (descent not guaranteed).
    pub step_bound_exceeded: usize,
}

struct Job {
    n: usize,
    df: f64,
    rep: usize,
}

struct JobOutcome {
    rows: Vec<ResultRow>,
    missing: Vec<MissingCell>,
    step_bound_exceeded: usize,
}

fn run_job(spec: &ExperimentSpec, job: &Job) -> JobOutcome {
    let data_seed = path_seed(spec.seed, job.n, job.df, job.rep);
    let row = |tau: f64, lambda: f64, error: Option<f64>, iterations: usize, converged: bool| ResultRow {
        case: spec.case,
        p: spec.p,
        n: job.n,
        d: spec.d,
        df: job.df,
        tau,
        lambda,
        rep: job.rep,
        error,
        iterations,
        converged,
        seed: data_seed,
    };
    let mut out = JobOutcome {
        rows: Vec::new(),
        missing: Vec::new(),
        step_bound_exceeded: 0,
    };
    // the penalty level does not depend on the data, so missing rows keep it
    let lambda_for = |tau: f64| {
        RobustConfig::new(tau, spec.b)
            .and_then(|cfg| spec.lambda_mode.resolve(spec.p, spec.d, job.n, &cfg))
            .unwrap_or(f64::NAN)
    };
    let fail_all = |out: &mut JobOutcome, reason: String| {
        for &tau in &spec.tau_grid {
            out.rows.push(row(tau, lambda_for(tau), None, 0, false));
            out.missing.push(MissingCell {
                n: job.n,
                df: job.df,
                tau,
                rep: job.rep,
                reason: reason.clone(),
            });
        }
    };

    let generated = (|| {
        let b = gen_er_transition_with(spec.p, spec.density, spec.rho_target, model_seed(spec.seed, job.rep), spec.edge_weights)?;
        let mut coeffs = vec![nalgebra::DMatrix::zeros(spec.p, spec.p); spec.d];
        coeffs[0] = b;
        let model = VarModel::new(coeffs)?;
        let dgp = DgpSpec::var_t(model.clone(), NoiseSpec::student_t(job.df)?)?;
        let (data, _) = simulate_retrying(&dgp, job.n + spec.d, spec.burn_in, data_seed, spec.max_retries)?;
        Ok::<_, Error>((model, data))
    })();
    let (truth, data) = match generated {
        Ok(v) => v,
        Err(e) => {
            fail_all(&mut out, format!("{}: {e}", e.kind()));
            return out;
        }
    };

    for &tau in &spec.tau_grid {
        let fitted = RobustConfig::new(tau, spec.b).and_then(|robust| {
            let cfg = FitConfig {
                opt: OptimizerConfig {
                    seed: data_seed,
                    ..spec.opt.clone()
                },
                ..FitConfig::new(robust, spec.lambda_mode)
            };
            let fit = fit_var(&data, spec.d, &cfg)?;
            let err = estimation_error(&fit.model, &truth)?;
            Ok((fit, err))
        });
        match fitted {
            Ok((fit, err)) => {
                out.step_bound_exceeded += fit.fits.iter().filter(|f| f.step > f.step_bound).count();
                out.rows.push(row(tau, fit.lambda, Some(err), fit.max_iterations(), fit.all_converged()));
            }
            Err(e) => {
                out.rows.push(row(tau, lambda_for(tau), None, 0, false));
                out.missing.push(MissingCell {
                    n: job.n,
                    df: job.df,
                    tau,
                    rep: job.rep,
                    reason: format!("{}: {e}", e.kind()),
                });
            }
        }
    }
    out
}

/// Run every grid point and replication.
///
/// Rows are ordered by `(n, df, tau, rep)` following the grid order of the
/// spec, independent of the worker count.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentOutput> {
    spec.validate()?;
    let mut jobs = Vec::new();
    for &n in &spec.n_grid {
        for &df in &spec.df_grid {
            for rep in 0..spec.replications {
                jobs.push(Job { n, df, rep });
            }
        }
    }
    let run = || jobs.par_iter().map(|j| run_job(spec, j)).collect::<Vec<_>>();
    let outcomes = match spec.resolved_workers()? {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?
            .install(run),
        None => run(),
    };

    // jobs are (n, df, rep)-major; regroup so τ varies before rep
    let n_tau = spec.tau_grid.len();
    let mut table = ResultsTable::default();
    let mut step_bound_exceeded = 0;
    for cell in outcomes.chunks(spec.replications) {
        for t in 0..n_tau {
            for o in cell {
                table.rows.push(o.rows[t].clone());
            }
        }
        for o in cell {
            table.missing.extend(o.missing.iter().cloned());
            step_bound_exceeded += o.step_bound_exceeded;
        }
    }
    if step_bound_exceeded > 0 {
        log::warn!(
            "{step_bound_exceeded} column fits used a step above 1/L; monotone descent is not guaranteed for them"
        );
    }
    for m in &table.missing {
        log::warn!("missing cell n={} df={} tau={} rep={}: {}", m.n, m.df, m.tau, m.rep, m.reason);
    }
    Ok(ExperimentOutput {
        table,
        step_bound_exceeded,
    })
}

/// Everything needed to regenerate a run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub rng: String,
    pub seed: u64,
    pub lambda_mode: Option<LambdaMode>,
    /// The full input (spec, flags) of the run.
    pub spec: serde_json::Value,
    pub outputs: Vec<String>,
    #[serde(default)]
    pub missing: Vec<MissingCell>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl Provenance {
    pub fn new(command: &str, seed: u64, spec: serde_json::Value) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            rng: RNG_ALGORITHM.into(),
            seed,
            lambda_mode: None,
            spec,
            outputs: Vec::new(),
            missing: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("provenance serializes");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("provenance {}: {e}", path.display())))
    }
}

/// Files written by [`write_experiment`].
pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const PLOT_FILE: &str = "plot.svg";
pub const PROVENANCE_FILE: &str = "provenance.json";

/// Run `spec` and write results, summary, plot and provenance into `dir`.
pub fn write_experiment(spec: &ExperimentSpec, dir: &Path) -> Result<ExperimentOutput> {
    let out = run_experiment(spec)?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    out.table.write_csv(dir.join(RESULTS_FILE))?;
    let summary = summarize(&out.table);
    let summary_path = dir.join(SUMMARY_FILE);
    std::fs::write(&summary_path, summary_csv(&summary)).map_err(|e| Error::io(&summary_path, e))?;
    emit_svg_lines(&out.table, spec.case.x_axis(), Field::Tau, dir.join(PLOT_FILE))?;

    let mut prov = Provenance::new("experiment", spec.seed, serde_json::to_value(spec).expect("spec serializes"));
    prov.lambda_mode = Some(spec.lambda_mode);
    prov.outputs = [RESULTS_FILE, SUMMARY_FILE, PLOT_FILE].iter().map(|s| s.to_string()).collect();
    prov.missing = out.table.missing.clone();
    if out.step_bound_exceeded > 0 {
        prov.notes.push(format!("{} column fits used a step above 1/L", out.step_bound_exceeded));
    }
    prov.write(dir.join(PROVENANCE_FILE))?;
    Ok(out)
}
