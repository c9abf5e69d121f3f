//! Proximal gradient descent for `L_n(β) + λ·R(β)`.
//!
//! Each iteration is `β ← prox_{λ·step}(β − step·∇L_n(β))`, started from a
//! random unit vector and stopped once `||β^{t+1} − β^t||₂ ≤ tol`.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::penalty::Penalty;
use crate::robust_loss::{Regression, RobustConfig, RobustLoss};

/// How the step size `1/ζ` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    Fixed(f64),
    /// `0.99 / L` with `L` the Lipschitz bound of the robust gradient.
    Safe,
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule::Fixed(0.9)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub step: StepRule,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub record_trace: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            step: StepRule::default(),
            tol: 1e-4,
            max_iter: 10_000,
            seed: 0,
            record_trace: cfg!(test),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if let StepRule::Fixed(s) = self.step {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("step must be positive, got {s}")));
            }
        }
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub beta_hat: DVector<f64>,
    pub iterations: usize,
    /// `||β^{t+1} − β^t||₂` at the last iteration.
    pub final_change: f64,
    /// Penalized objective at the start point and after every iteration.
    pub objective_trace: Option<Vec<f64>>,
    pub converged: bool,
    /// Step size actually used.
    pub step: f64,
    /// `1/L`: largest step with guaranteed monotone descent on this instance.
    pub step_bound: f64,
}

/// Uniform(−1, 1) coordinates scaled to unit Euclidean norm.
pub fn init_beta(q: usize, seed: u64) -> DVector<f64> {
    assert!(q >= 1, "init_beta needs q >= 1");
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    loop {
        let v = DVector::from_fn(q, |_, _| rng.random_range(-1.0..1.0));
        let norm = v.norm();
        if norm > 0.0 {
            return v / norm;
        }
    }
}

/// Fit one regression from the seeded random start.
pub fn proximal_gradient_fit(
    reg: &Regression,
    cfg: &RobustConfig,
    pen: &Penalty,
    lambda: f64,
    opt: &OptimizerConfig,
) -> Result<FitResult> {
    let loss = RobustLoss::new(reg, cfg)?;
    let start = init_beta(reg.q(), opt.seed);
    proximal_gradient_from(&loss, pen, lambda, opt, start)
}

/// Run the iteration from an explicit starting point.
pub fn proximal_gradient_from(
    loss: &RobustLoss<'_>,
    pen: &Penalty,
    lambda: f64,
    opt: &OptimizerConfig,
    start: DVector<f64>,
) -> Result<FitResult> {
    opt.validate()?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Config(format!("lambda must be nonnegative, got {lambda}")));
    }
    loss.check_beta(&start)?;
    pen.check_dim(start.len())?;

    let lipschitz = loss.lipschitz_bound();
    let step_bound = if lipschitz > 0.0 { 1.0 / lipschitz } else { f64::INFINITY };
    let step = match opt.step {
        StepRule::Fixed(s) => s,
        StepRule::Safe if lipschitz > 0.0 => 0.99 / lipschitz,
        StepRule::Safe => 1.0,
    };

    let objective = |b: &DVector<f64>| -> Result<f64> { Ok(loss.value(b) + lambda * pen.value(b)?) };
    let mut trace = opt.record_trace.then(Vec::new);
    if let Some(t) = trace.as_mut() {
        t.push(objective(&start)?);
    }

    let mut beta = start;
    let mut final_change = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opt.max_iter {
        let grad = loss.gradient(&beta);
        let forward = &beta - grad * step;
        if forward.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { iteration: iterations + 1, step });
        }
        let next = pen.prox(&forward, lambda * step)?;
        iterations += 1;
        final_change = (&next - &beta).norm();
        if !final_change.is_finite() {
            return Err(Error::Divergence { iteration: iterations, step });
        }
        if let Some(t) = trace.as_mut() {
            t.push(objective(&next)?);
        }
        beta = next;
        if final_change <= opt.tol {
            converged = true;
            break;
        }
    }

    Ok(FitResult {
        beta_hat: beta,
        iterations,
        final_change,
        objective_trace: trace,
        converged,
        step,
        step_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::penalty::Groups;
    use nalgebra::DMatrix;
    use rand_distr::StandardNormal;

    fn gaussian_regression(seed: u64, n: usize, q: usize, noise: f64) -> (Regression, DVector<f64>) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let x = DMatrix::from_fn(n, q, |_, _| rng.sample::<f64, _>(StandardNormal));
        let beta = DVector::from_fn(q, |i, _| if i % 2 == 0 { 0.8 } else { 0.0 });
        let y = &x * &beta + DVector::from_fn(n, |_, _| noise * rng.sample::<f64, _>(StandardNormal));
        (Regression::new(y, x).unwrap(), beta)
    }

    #[test]
    fn init_is_deterministic_unit_vector() {
        assert_eq!(init_beta(3, 7), init_beta(3, 7));
        assert_ne!(init_beta(3, 7), init_beta(3, 8));
        for q in [1, 2, 5, 40] {
            assert!((init_beta(q, 99).norm() - 1.0).abs() < 1e-12);
        }
        assert_eq!(init_beta(1, 123)[0].abs(), 1.0);
    }

    #[test]
    fn config_validation() {
        let mut opt = OptimizerConfig::default();
        assert!(opt.validate().is_ok());
        opt.tol = 0.0;
        assert!(opt.validate().is_err());
        let opt = OptimizerConfig { step: StepRule::Fixed(-1.0), ..Default::default() };
        assert!(opt.validate().is_err());
        let opt = OptimizerConfig { max_iter: 0, ..Default::default() };
        assert!(opt.validate().is_err());
    }

    #[test]
    fn zero_response_gives_zero_estimate() {
        let (reg, _) = gaussian_regression(1, 40, 4, 0.0);
        let reg = Regression::new(DVector::zeros(40), reg.x().clone()).unwrap();
        let cfg = RobustConfig::new(1.0, 3.0).unwrap();
        let fit = proximal_gradient_fit(&reg, &cfg, &Penalty::L1, 0.1, &OptimizerConfig::default())
            .unwrap();
        assert!(fit.converged);
        assert_eq!(fit.beta_hat, DVector::zeros(4));
    }

    #[test]
    fn safe_step_descends_monotonically() {
        for seed in 0..10 {
            let (reg, _) = gaussian_regression(seed, 50, 6, 2.0);
            let cfg = RobustConfig::new(0.8, 2.0).unwrap();
            let opt = OptimizerConfig {
                step: StepRule::Safe,
                tol: 1e-9,
                record_trace: true,
                seed,
                ..Default::default()
            };
            for pen in [Penalty::L1, Penalty::Group(Groups::contiguous(&[3, 3]).unwrap())] {
                let fit = proximal_gradient_fit(&reg, &cfg, &pen, 0.05, &opt).unwrap();
                let trace = fit.objective_trace.unwrap();
                for w in trace.windows(2) {
                    assert!(w[1] <= w[0] + 1e-10, "objective rose: {} -> {}", w[0], w[1]);
                }
            }
        }
    }

    #[test]
    fn converged_stationary_point_is_fixed() {
        let (reg, _) = gaussian_regression(4, 60, 5, 1.0);
        let cfg = RobustConfig::new(1.0, 3.0).unwrap();
        let opt = OptimizerConfig {
            step: StepRule::Safe,
            tol: 1e-14,
            max_iter: 100_000,
            ..Default::default()
        };
        let fit = proximal_gradient_fit(&reg, &cfg, &Penalty::L1, 0.1, &opt).unwrap();
        assert!(fit.converged);
        let loss = RobustLoss::new(&reg, &cfg).unwrap();
        let one = OptimizerConfig { max_iter: 1, ..opt };
        let again = proximal_gradient_from(&loss, &Penalty::L1, 0.1, &one, fit.beta_hat.clone()).unwrap();
        assert!((again.beta_hat - fit.beta_hat).norm() <= 1e-12);
    }

    #[test]
    fn identical_inputs_give_identical_results() {
        let (reg, _) = gaussian_regression(8, 30, 5, 1.0);
        let cfg = RobustConfig::new(1.0, 3.0).unwrap();
        let opt = OptimizerConfig { seed: 17, ..Default::default() };
        let a = proximal_gradient_fit(&reg, &cfg, &Penalty::L1, 0.05, &opt).unwrap();
        let b = proximal_gradient_fit(&reg, &cfg, &Penalty::L1, 0.05, &opt).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn hitting_the_cap_is_not_an_error() {
        let (reg, _) = gaussian_regression(2, 30, 5, 1.0);
        let cfg = RobustConfig::new(1.0, 3.0).unwrap();
        let opt = OptimizerConfig { max_iter: 2, tol: 1e-15, ..Default::default() };
        let fit = proximal_gradient_fit(&reg, &cfg, &Penalty::L1, 0.01, &opt).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 2);
    }

    #[test]
    fn oversized_step_reports_divergence() {
        let (reg, _) = gaussian_regression(3, 30, 5, 1.0);
        // thresholds large enough that the loss stays quadratic until overflow
        let cfg = RobustConfig::new(1e300, 1e300).unwrap();
        let opt = OptimizerConfig { step: StepRule::Fixed(1e3), tol: 1e-12, ..Default::default() };
        let err = proximal_gradient_fit(&reg, &cfg, &Penalty::L1, 0.0, &opt).unwrap_err();
        assert!(matches!(err, Error::Divergence { .. }), "{err}");
    }

    #[test]
    fn negative_lambda_rejected() {
        let (reg, _) = gaussian_regression(3, 10, 2, 1.0);
        let cfg = RobustConfig::new(1.0, 3.0).unwrap();
        assert!(proximal_gradient_fit(&reg, &cfg, &Penalty::L1, -0.1, &OptimizerConfig::default()).is_err());
    }
}
