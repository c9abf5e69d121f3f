//! Robust sparse vector autoregression.
//!
//! Estimates sparse VAR transition matrices column by column with a
//! Huber-loss, Mallows-weighted, ℓ1-penalized objective fitted by proximal
//! gradient descent. Also includes heavy-tailed and heteroskedastic data
//! generators, empirical checks of the deviation and restricted-eigenvalue
//! conditions, and an experiment harness with CSV and SVG output.

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod experiment;
mod matrix_serde;
pub mod numeric;
pub mod optimizer;
pub mod penalty;
pub mod robust_loss;
pub mod series;
pub mod simulate;
pub mod var;

pub use error::{Error, Result};
pub use nalgebra;
pub use optimizer::{init_beta, proximal_gradient_fit, FitResult, OptimizerConfig, StepRule};
pub use penalty::{dual_value, group_soft_threshold, penalty_value, soft_threshold, Groups, Penalty};
pub use robust_loss::{
    huber_derivative, huber_value, mallows_weight, robust_gradient, robust_objective, Regression,
    RobustConfig, RobustLoss, Shrinkage, WeightForm,
};
pub use series::TimeSeriesMatrix;
pub use var::{
    companion_matrix, decompose_regressions, estimation_error, fit_var, rescale_to_radius,
    spectral_radius, theory_lambda, FitConfig, LambdaMode, VarFit, VarModel,
};
