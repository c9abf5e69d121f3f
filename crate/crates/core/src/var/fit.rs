use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::VarModel;
use crate::error::{Error, Result};
use crate::numeric::column_seed;
use crate::optimizer::{proximal_gradient_fit, FitResult, OptimizerConfig};
use crate::penalty::Penalty;
use crate::robust_loss::{Regression, RobustConfig};
use crate::series::TimeSeriesMatrix;

/// Split a VAR(d) sample into `p` regressions sharing one design matrix.
///
/// With rows `Z_0 … Z_T`, regression `j` has responses `Z_{t,j}` and
/// predictors `(Z_{t−1}, …, Z_{t−d})` for `t = d … T`, so `n = T − d + 1`.
pub fn decompose_regressions(data: &TimeSeriesMatrix, d: usize) -> Result<Vec<Regression>> {
    if d == 0 {
        return Err(Error::Config("lag order must be at least 1".into()));
    }
    let rows = data.n();
    if rows < d + 1 {
        return Err(Error::Empty(format!(
            "lag {d} needs at least {} observations, got {rows}",
            d + 1
        )));
    }
    let p = data.p();
    let z = data.data();
    let n = rows - d;
    let x = Arc::new(DMatrix::from_fn(n, p * d, |i, c| {
        let lag = c / p + 1;
        z[(i + d - lag, c % p)]
    }));
    (0..p)
        .map(|j| {
            let y = DVector::from_fn(n, |i, _| z[(i + d, j)]);
            Regression::shared(y, Arc::clone(&x))
        })
        .collect()
}

/// `c · b_M · τ · √(log(p·d) / n)`.
pub fn theory_lambda(p: usize, d: usize, n: usize, cfg: &RobustConfig, c: f64) -> Result<f64> {
    if n < 2 || p * d < 2 {
        return Err(Error::Config(format!(
            "theory lambda needs n >= 2 and p*d >= 2 (n={n}, p*d={})",
            p * d
        )));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::Config(format!("rate constant must be positive, got {c}")));
    }
    Ok(c * cfg.b_m() * cfg.tau() * ((p * d) as f64).ln().sqrt() / (n as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMode {
    Explicit(f64),
    /// Rate form with the width and compatibility constants folded into `c`.
    Theory(f64),
}

impl Default for LambdaMode {
    fn default() -> Self {
        LambdaMode::Theory(1.0)
    }
}

impl LambdaMode {
    pub fn resolve(&self, p: usize, d: usize, n: usize, cfg: &RobustConfig) -> Result<f64> {
        match *self {
            LambdaMode::Explicit(l) if l >= 0.0 && l.is_finite() => Ok(l),
            LambdaMode::Explicit(l) => Err(Error::Config(format!("lambda must be nonnegative, got {l}"))),
            LambdaMode::Theory(c) => theory_lambda(p, d, n, cfg, c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub robust: RobustConfig,
    #[serde(default)]
    pub penalty: Penalty,
    #[serde(default)]
    pub lambda: LambdaMode,
    #[serde(default)]
    pub opt: OptimizerConfig,
}

impl FitConfig {
    pub fn new(robust: RobustConfig, lambda: LambdaMode) -> Self {
        Self {
            robust,
            penalty: Penalty::L1,
            lambda,
            opt: OptimizerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarFit {
    pub model: VarModel,
    /// One optimizer result per column regression, in column order.
    pub fits: Vec<FitResult>,
    pub lambda: f64,
}

impl VarFit {
    pub fn all_converged(&self) -> bool {
        self.fits.iter().all(|f| f.converged)
    }

    pub fn max_iterations(&self) -> usize {
        self.fits.iter().map(|f| f.iterations).max().unwrap_or(0)
    }
}

/// Estimate all `p` columns with a common penalty level.
///
/// Column `j` is started from the seed `column_seed(opt.seed, j)`, so the
/// result does not depend on how many threads run the columns.
pub fn fit_var(data: &TimeSeriesMatrix, d: usize, fit: &FitConfig) -> Result<VarFit> {
    fit.opt.validate()?;
    let regs = decompose_regressions(data, d)?;
    let p = data.p();
    let n = regs[0].n();
    let lambda = fit.lambda.resolve(p, d, n, &fit.robust)?;
    fit.penalty.check_dim(p * d)?;

    let fits = regs
        .par_iter()
        .enumerate()
        .map(|(j, reg)| {
            let opt = OptimizerConfig {
                seed: column_seed(fit.opt.seed, j),
                ..fit.opt.clone()
            };
            proximal_gradient_fit(reg, &fit.robust, &fit.penalty, lambda, &opt)
                .map_err(|e| Error::Column { column: j, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut coeffs = vec![DMatrix::zeros(p, p); d];
    for (j, f) in fits.iter().enumerate() {
        for (i, v) in f.beta_hat.iter().enumerate() {
            coeffs[i / p][(i % p, j)] = *v;
        }
    }
    Ok(VarFit {
        model: VarModel::new(coeffs)?,
        fits,
        lambda,
    })
}

/// `max_j ||B̂_j − B_j||₂` over the stacked columns of all lag matrices.
pub fn estimation_error(b_hat: &VarModel, b_true: &VarModel) -> Result<f64> {
    if b_hat.p() != b_true.p() || b_hat.d() != b_true.d() {
        return Err(Error::Dimension(format!(
            "models differ in shape: p={} d={} vs p={} d={}",
            b_hat.p(),
            b_hat.d(),
            b_true.p(),
            b_true.d()
        )));
    }
    Ok((0..b_hat.p())
        .map(|j| (b_hat.column(j) - b_true.column(j)).norm())
        .fold(0.0, f64::max))
}
