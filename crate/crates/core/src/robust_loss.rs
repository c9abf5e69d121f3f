//! Huber loss, Mallows weights and the weighted robust empirical objective
//! for a single stochastic regression `y_i = x_iᵀβ + ε_i`.
//!
//! The objective is
//!
//! ```text
//! L_n(β) = (1/n) Σ_i w(x_i) · ℓ_τ( w(x_i) · (y_i − x_iᵀβ) )
//! ```
//!
//! with `ℓ_τ` the Huber loss and `w` a Mallows weight. Its gradient is
//! `−(1/n) Σ_i ℓ'_τ(w_i r_i) · w_i² · x_i`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

/// Which of the two Mallows weight variants to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightForm {
    /// `min(1, b / ||B_M x||)`
    #[default]
    Linear,
    /// `min(1, b² / ||B_M x||²)`
    Quadratic,
}

/// Mallows shrinkage matrix `B_M`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shrinkage {
    #[default]
    Identity,
    Matrix(#[serde(with = "crate::matrix_serde")] DMatrix<f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RobustConfigRaw {
    tau: f64,
    b: f64,
    #[serde(default)]
    shrinkage: Shrinkage,
    #[serde(default)]
    weight_form: WeightForm,
}

/// Huber cut-off `τ`, Mallows radius `b` and shrinkage matrix `B_M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RobustConfigRaw", into = "RobustConfigRaw")]
pub struct RobustConfig {
    tau: f64,
    b: f64,
    shrinkage: Shrinkage,
    weight_form: WeightForm,
    shrinkage_min_eig: f64,
}

impl TryFrom<RobustConfigRaw> for RobustConfig {
    type Error = Error;

    fn try_from(raw: RobustConfigRaw) -> Result<Self> {
        RobustConfig::new(raw.tau, raw.b)?
            .with_shrinkage(raw.shrinkage)
            .map(|c| c.with_weight_form(raw.weight_form))
    }
}

impl From<RobustConfig> for RobustConfigRaw {
    fn from(c: RobustConfig) -> Self {
        RobustConfigRaw {
            tau: c.tau,
            b: c.b,
            shrinkage: c.shrinkage,
            weight_form: c.weight_form,
        }
    }
}

impl RobustConfig {
    /// Identity shrinkage and linear weights.
    pub fn new(tau: f64, b: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Config(format!("tau must be positive and finite, got {tau}")));
        }
        if !(b > 0.0 && b.is_finite()) {
            return Err(Error::Config(format!("b must be positive and finite, got {b}")));
        }
        Ok(Self {
            tau,
            b,
            shrinkage: Shrinkage::Identity,
            weight_form: WeightForm::Linear,
            shrinkage_min_eig: 1.0,
        })
    }

    /// Replace the shrinkage matrix. It must be symmetric positive definite.
    pub fn with_shrinkage(mut self, shrinkage: Shrinkage) -> Result<Self> {
        self.shrinkage_min_eig = match &shrinkage {
            Shrinkage::Identity => 1.0,
            Shrinkage::Matrix(m) => {
                if !m.is_square() || m.nrows() == 0 {
                    return Err(Error::Config("shrinkage matrix must be square".into()));
                }
                let asym = (m - m.transpose()).amax();
                if !(asym <= 1e-12 * m.amax().max(1.0)) {
                    return Err(Error::Config("shrinkage matrix must be symmetric".into()));
                }
                let min_eig = SymmetricEigen::new(m.clone()).eigenvalues.min();
                if !(min_eig > 0.0) {
                    return Err(Error::Config(format!(
                        "shrinkage matrix must be positive definite (min eigenvalue {min_eig})"
                    )));
                }
                min_eig
            }
        };
        self.shrinkage = shrinkage;
        Ok(self)
    }

    pub fn with_weight_form(mut self, weight_form: WeightForm) -> Self {
        self.weight_form = weight_form;
        self
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn shrinkage(&self) -> &Shrinkage {
        &self.shrinkage
    }

    pub fn weight_form(&self) -> WeightForm {
        self.weight_form
    }

    /// Mallows parameter `b_M = b / Λ_min(B_M)`; bounds `||w(x)·x||`.
    pub fn b_m(&self) -> f64 {
        self.b / self.shrinkage_min_eig
    }
}

/// One stochastic regression. The design matrix is reference counted so the
/// `p` column regressions of a VAR share a single copy.
#[derive(Debug, Clone)]
pub struct Regression {
    y: DVector<f64>,
    x: Arc<DMatrix<f64>>,
}

impl Regression {
    pub fn new(y: DVector<f64>, x: DMatrix<f64>) -> Result<Self> {
        Self::shared(y, Arc::new(x))
    }

    pub fn shared(y: DVector<f64>, x: Arc<DMatrix<f64>>) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::Empty("regression needs at least one observation".into()));
        }
        if y.len() != x.nrows() {
            return Err(Error::Dimension(format!(
                "y has {} rows but x has {}",
                y.len(),
                x.nrows()
            )));
        }
        if x.ncols() == 0 {
            return Err(Error::Empty("regression needs at least one predictor".into()));
        }
        if y.iter().chain(x.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("regression data must be finite".into()));
        }
        Ok(Self { y, x })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn q(&self) -> usize {
        self.x.ncols()
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn x_shared(&self) -> &Arc<DMatrix<f64>> {
        &self.x
    }
}

#[inline]
pub(crate) fn huber(u: f64, tau: f64) -> f64 {
    let a = u.abs();
    if a <= tau {
        0.5 * u * u
    } else {
        tau * a - 0.5 * tau * tau
    }
}

#[inline]
pub(crate) fn huber_psi(u: f64, tau: f64) -> f64 {
    u.clamp(-tau, tau)
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("tau must be positive, got {tau}")))
    }
}

/// Huber loss: `u²/2` for `|u| ≤ τ`, `τ|u| − τ²/2` otherwise.
pub fn huber_value(u: f64, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    if !u.is_finite() {
        return Err(Error::Domain(format!("huber loss of non-finite argument {u}")));
    }
    Ok(huber(u, tau))
}

/// Derivative of the Huber loss, i.e. `u` clipped to `[−τ, τ]`.
pub fn huber_derivative(u: f64, tau: f64) -> Result<f64> {
    check_tau(tau)?;
    if !u.is_finite() {
        return Err(Error::Domain(format!("huber derivative of non-finite argument {u}")));
    }
    Ok(huber_psi(u, tau))
}

fn shrunk_norm(x: &[f64], cfg: &RobustConfig) -> Result<f64> {
    match &cfg.shrinkage {
        Shrinkage::Identity => Ok(x.iter().map(|v| v * v).sum::<f64>().sqrt()),
        Shrinkage::Matrix(m) => {
            if m.ncols() != x.len() {
                return Err(Error::Dimension(format!(
                    "shrinkage is {}x{} but predictor has length {}",
                    m.nrows(),
                    m.ncols(),
                    x.len()
                )));
            }
            let mut sq = 0.0;
            for i in 0..m.nrows() {
                let row: f64 = (0..x.len()).map(|k| m[(i, k)] * x[k]).sum();
                sq += row * row;
            }
            Ok(sq.sqrt())
        }
    }
}

/// Mallows weight of a predictor vector. `w(0) = 1`.
pub fn mallows_weight(x: &[f64], cfg: &RobustConfig) -> Result<f64> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("predictor must be finite".into()));
    }
    let norm = shrunk_norm(x, cfg)?;
    if norm == 0.0 {
        return Ok(1.0);
    }
    let ratio = cfg.b / norm;
    Ok(match cfg.weight_form {
        WeightForm::Linear => ratio.min(1.0),
        WeightForm::Quadratic => (ratio * ratio).min(1.0),
    })
}

/// Robust objective for a regression with its Mallows weights computed once.
#[derive(Debug, Clone)]
pub struct RobustLoss<'a> {
    reg: &'a Regression,
    tau: f64,
    weights: Vec<f64>,
}

impl<'a> RobustLoss<'a> {
    pub fn new(reg: &'a Regression, cfg: &RobustConfig) -> Result<Self> {
        let x = reg.x();
        let mut row = vec![0.0; reg.q()];
        let mut weights = Vec::with_capacity(reg.n());
        for i in 0..reg.n() {
            for (k, slot) in row.iter_mut().enumerate() {
                *slot = x[(i, k)];
            }
            weights.push(mallows_weight(&row, cfg)?);
        }
        Ok(Self {
            reg,
            tau: cfg.tau,
            weights,
        })
    }

    pub fn regression(&self) -> &Regression {
        self.reg
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn check_beta(&self, beta: &DVector<f64>) -> Result<()> {
        if beta.len() != self.reg.q() {
            return Err(Error::Dimension(format!(
                "beta has length {} but regression has {} predictors",
                beta.len(),
                self.reg.q()
            )));
        }
        Ok(())
    }

    /// Residuals `y − Xβ`.
    pub fn residuals(&self, beta: &DVector<f64>) -> Vec<f64> {
        let x = self.reg.x();
        let y = self.reg.y();
        (0..self.reg.n())
            .map(|i| {
                let mut acc = CompensatedSum::new();
                acc.add(y[i]);
                for k in 0..beta.len() {
                    acc.add(-x[(i, k)] * beta[k]);
                }
                acc.value()
            })
            .collect()
    }

    pub fn value(&self, beta: &DVector<f64>) -> f64 {
        let r = self.residuals(beta);
        let mut acc = CompensatedSum::new();
        for (ri, &w) in r.iter().zip(&self.weights) {
            acc.add(w * huber(w * ri, self.tau));
        }
        acc.value() / self.reg.n() as f64
    }

    pub fn gradient(&self, beta: &DVector<f64>) -> DVector<f64> {
        let r = self.residuals(beta);
        let coef: Vec<f64> = r
            .iter()
            .zip(&self.weights)
            .map(|(ri, &w)| huber_psi(w * ri, self.tau) * w * w)
            .collect();
        let x = self.reg.x();
        let n = self.reg.n() as f64;
        DVector::from_fn(self.reg.q(), |k, _| {
            let col = x.column(k);
            let mut acc = CompensatedSum::new();
            for (c, xi) in coef.iter().zip(col.iter()) {
                acc.add(c * xi);
            }
            -acc.value() / n
        })
    }

    /// `Λ_max((1/n) Σ w_i³ x_i x_iᵀ)`, a Lipschitz constant of the gradient.
    pub fn lipschitz_bound(&self) -> f64 {
        let x = self.reg.x();
        let q = self.reg.q();
        let mut gram = DMatrix::<f64>::zeros(q, q);
        for (i, &w) in self.weights.iter().enumerate() {
            let w3 = w * w * w;
            for a in 0..q {
                let xa = x[(i, a)] * w3;
                for b in 0..q {
                    gram[(a, b)] += xa * x[(i, b)];
                }
            }
        }
        gram /= self.reg.n() as f64;
        SymmetricEigen::new(gram).eigenvalues.max().max(0.0)
    }
}

/// `(1/n) Σ w(x_i) ℓ_τ[w(x_i)(y_i − x_iᵀβ)]`.
pub fn robust_objective(reg: &Regression, beta: &DVector<f64>, cfg: &RobustConfig) -> Result<f64> {
    let loss = RobustLoss::new(reg, cfg)?;
    loss.check_beta(beta)?;
    Ok(loss.value(beta))
}

/// Gradient of [`robust_objective`] in `β`.
pub fn robust_gradient(
    reg: &Regression,
    beta: &DVector<f64>,
    cfg: &RobustConfig,
) -> Result<DVector<f64>> {
    let loss = RobustLoss::new(reg, cfg)?;
    loss.check_beta(beta)?;
    Ok(loss.gradient(beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(rng: &mut ChaCha8Rng, n: usize, q: usize) -> (Regression, DVector<f64>) {
        let x = DMatrix::from_fn(n, q, |_, _| rng.random_range(-3.0..3.0));
        let y = DVector::from_fn(n, |_, _| rng.random_range(-4.0..4.0));
        let beta = DVector::from_fn(q, |_, _| rng.random_range(-1.0..1.0));
        (Regression::new(y, x).unwrap(), beta)
    }

    // straightforward double loop, no caching, no compensation
    fn naive_objective(reg: &Regression, beta: &DVector<f64>, cfg: &RobustConfig) -> f64 {
        let mut total = 0.0;
        for i in 0..reg.n() {
            let xi: Vec<f64> = (0..reg.q()).map(|k| reg.x()[(i, k)]).collect();
            let mut fit = 0.0;
            for k in 0..reg.q() {
                fit += xi[k] * beta[k];
            }
            let norm = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
            let w = if norm == 0.0 { 1.0 } else { (cfg.b() / norm).min(1.0) };
            let u = w * (reg.y()[i] - fit);
            let l = if u.abs() <= cfg.tau() {
                u * u / 2.0
            } else {
                cfg.tau() * u.abs() - cfg.tau() * cfg.tau() / 2.0
            };
            total += w * l;
        }
        total / reg.n() as f64
    }

    #[test]
    fn huber_examples() {
        assert_eq!(huber_value(0.0, 1.0).unwrap(), 0.0);
        assert_eq!(huber_value(1.0, 2.0).unwrap(), 0.5);
        assert_eq!(huber_value(3.0, 1.0).unwrap(), 2.5);
        assert!(huber_value(f64::NAN, 1.0).is_err());
        assert!(huber_value(1.0, 0.0).is_err());
    }

    #[test]
    fn huber_derivative_examples() {
        assert_eq!(huber_derivative(0.0, 1.0).unwrap(), 0.0);
        assert_eq!(huber_derivative(0.4, 1.0).unwrap(), 0.4);
        assert_eq!(huber_derivative(-5.0, 2.0).unwrap(), -2.0);
        assert_eq!(huber_derivative(2.0, 2.0).unwrap(), 2.0);
        assert!(huber_derivative(f64::INFINITY, 1.0).is_err());
    }

    #[test]
    fn huber_is_continuous_at_threshold() {
        let tau = 1.7;
        let eps = 1e-9;
        assert!((huber(tau - eps, tau) - huber(tau + eps, tau)).abs() < 1e-8);
        assert!((huber_psi(tau - eps, tau) - huber_psi(tau + eps, tau)).abs() < 1e-8);
    }

    #[test]
    fn mallows_examples() {
        let cfg = RobustConfig::new(1.0, 3.0).unwrap();
        // ||(0, 6)|| = 6
        assert_eq!(mallows_weight(&[0.0, 6.0], &cfg).unwrap(), 0.5);
        assert_eq!(mallows_weight(&[0.0, 0.0, 0.0], &cfg).unwrap(), 1.0);
        assert_eq!(mallows_weight(&[0.0, 2.0], &cfg).unwrap(), 1.0);
        let quad = cfg.clone().with_weight_form(WeightForm::Quadratic);
        assert_eq!(mallows_weight(&[0.0, 6.0], &quad).unwrap(), 0.25);
    }

    #[test]
    fn mallows_dimension_mismatch() {
        let cfg = RobustConfig::new(1.0, 3.0)
            .unwrap()
            .with_shrinkage(Shrinkage::Matrix(DMatrix::identity(3, 3)))
            .unwrap();
        assert!(matches!(
            mallows_weight(&[1.0, 2.0], &cfg),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn shrinkage_must_be_positive_definite() {
        let base = RobustConfig::new(1.0, 3.0).unwrap();
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(base.clone().with_shrinkage(Shrinkage::Matrix(bad)).is_err());
        let good = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let cfg = base.with_shrinkage(Shrinkage::Matrix(good)).unwrap();
        assert!((cfg.b_m() - 1.5).abs() < 1e-12);
        assert!(RobustConfig::new(0.0, 1.0).is_err());
        assert!(RobustConfig::new(1.0, -1.0).is_err());
    }

    #[test]
    fn objective_examples() {
        let cfg = RobustConfig::new(1.0, 1e8).unwrap();
        let reg = Regression::new(DVector::from_vec(vec![3.0]), DMatrix::zeros(1, 1)).unwrap();
        let v = robust_objective(&reg, &DVector::zeros(1), &cfg).unwrap();
        assert_eq!(v, 2.5);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = DMatrix::from_fn(12, 4, |_, _| rng.random_range(-2.0..2.0));
        let beta = DVector::from_vec(vec![0.3, -0.2, 0.0, 1.1]);
        let y = &x * &beta;
        let reg = Regression::new(y, x).unwrap();
        let cfg = RobustConfig::new(0.7, 2.0).unwrap();
        assert!(robust_objective(&reg, &beta, &cfg).unwrap().abs() < 1e-14);
        let g = robust_gradient(&reg, &beta, &cfg).unwrap();
        assert!(g.amax() < 1e-14);
    }

    #[test]
    fn objective_matches_naive_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let (reg, beta) = random_instance(&mut rng, 15, 4);
            let cfg = RobustConfig::new(rng.random_range(0.3..3.0), 2.5).unwrap();
            let fast = robust_objective(&reg, &beta, &cfg).unwrap();
            let slow = naive_objective(&reg, &beta, &cfg);
            assert!((fast - slow).abs() <= 1e-12 * slow.abs().max(1.0));
        }
    }

    #[test]
    fn saturated_gradient_is_sign_average() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = DMatrix::from_fn(8, 3, |_, _| rng.random_range(-1.0..1.0));
        let y = DVector::from_fn(8, |i, _| if i % 3 == 0 { -1e6 } else { 1e6 });
        let reg = Regression::new(y.clone(), x.clone()).unwrap();
        let cfg = RobustConfig::new(1.0, 1e8).unwrap();
        let g = robust_gradient(&reg, &DVector::zeros(3), &cfg).unwrap();
        for k in 0..3 {
            let expect: f64 =
                -(0..8).map(|i| y[i].signum() * x[(i, k)]).sum::<f64>() / 8.0;
            assert!((g[k] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn empty_and_mismatched_regressions_rejected() {
        assert!(Regression::new(DVector::zeros(0), DMatrix::zeros(0, 2)).is_err());
        assert!(Regression::new(DVector::zeros(3), DMatrix::zeros(2, 2)).is_err());
        let reg = Regression::new(DVector::zeros(2), DMatrix::zeros(2, 2)).unwrap();
        let cfg = RobustConfig::new(1.0, 1.0).unwrap();
        assert!(robust_objective(&reg, &DVector::zeros(3), &cfg).is_err());
    }

    #[test]
    fn large_thresholds_recover_half_mse() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (reg, beta) = random_instance(&mut rng, 30, 5);
        let cfg = RobustConfig::new(1e8, 1e8).unwrap();
        let v = robust_objective(&reg, &beta, &cfg).unwrap();
        let r = reg.y() - reg.x() * &beta;
        let half_mse = r.norm_squared() / (2.0 * reg.n() as f64);
        assert!((v - half_mse).abs() <= 1e-8 * half_mse);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let h = 1e-6;
        for _ in 0..100 {
            let (reg, beta) = random_instance(&mut rng, 20, 5);
            let cfg = RobustConfig::new(rng.random_range(0.5..5.0), 3.0).unwrap();
            let g = robust_gradient(&reg, &beta, &cfg).unwrap();
            let fd = DVector::from_fn(5, |k, _| {
                let mut up = beta.clone();
                let mut dn = beta.clone();
                up[k] += h;
                dn[k] -= h;
                (robust_objective(&reg, &up, &cfg).unwrap()
                    - robust_objective(&reg, &dn, &cfg).unwrap())
                    / (2.0 * h)
            });
            let rel = (&g - &fd).norm() / g.norm().max(1e-12);
            assert!(rel <= 1e-6, "relative error {rel}");
        }
    }

    #[test]
    fn objective_is_convex() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for _ in 0..100 {
            let (reg, b1) = random_instance(&mut rng, 10, 3);
            let b2 = DVector::from_fn(3, |_, _| rng.random_range(-2.0..2.0));
            let t: f64 = rng.random_range(0.01..0.99);
            let cfg = RobustConfig::new(rng.random_range(0.2..2.0), 2.0).unwrap();
            let f = |b: &DVector<f64>| robust_objective(&reg, b, &cfg).unwrap();
            let mid = &b1 * t + &b2 * (1.0 - t);
            assert!(f(&mid) <= t * f(&b1) + (1.0 - t) * f(&b2) + 1e-12);
        }
    }

    proptest! {
        #[test]
        fn huber_symmetry(u in -1e3f64..1e3, tau in 1e-3f64..1e2) {
            prop_assert_eq!(huber_value(u, tau).unwrap(), huber_value(-u, tau).unwrap());
            prop_assert_eq!(huber_derivative(-u, tau).unwrap(), -huber_derivative(u, tau).unwrap());
            prop_assert!(huber_value(u, tau).unwrap() <= u * u / 2.0);
            prop_assert!(huber_derivative(u, tau).unwrap().abs() <= tau);
        }

        #[test]
        fn weighted_predictor_is_bounded(
            xs in proptest::collection::vec(-1e4f64..1e4, 1..8),
            b in 0.1f64..10.0,
            diag in proptest::collection::vec(0.1f64..5.0, 8),
            quadratic in any::<bool>(),
        ) {
            let q = xs.len();
            let m = DMatrix::from_fn(q, q, |i, j| if i == j { diag[i] } else { 0.0 });
            let form = if quadratic { WeightForm::Quadratic } else { WeightForm::Linear };
            let cfg = RobustConfig::new(1.0, b).unwrap()
                .with_shrinkage(Shrinkage::Matrix(m)).unwrap()
                .with_weight_form(form);
            let w = mallows_weight(&xs, &cfg).unwrap();
            prop_assert!(w > 0.0 && w <= 1.0);
            let norm = xs.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!(w * norm <= cfg.b_m() + 1e-12 * cfg.b_m().max(1.0));
        }
    }
}
