use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use robvar::numeric::column_seed;
use robvar::simulate::{simulate, DgpSpec, NoiseSpec};
use robvar::{
    decompose_regressions, estimation_error, fit_var, proximal_gradient_fit, robust_objective, FitConfig, LambdaMode,
    OptimizerConfig, Penalty, Regression, RobustConfig, StepRule, TimeSeriesMatrix, VarModel,
};

fn tight(seed: u64) -> OptimizerConfig {
    OptimizerConfig {
        step: StepRule::Safe,
        tol: 1e-12,
        max_iter: 200_000,
        seed,
        record_trace: false,
    }
}

fn instance(seed: u64, n: usize, q: usize) -> Regression {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = DMatrix::from_fn(n, q, |_, _| rng.sample::<f64, _>(StandardNormal));
    let beta = DVector::from_fn(q, |i, _| if i % 2 == 0 { 0.8 } else { 0.0 });
    let noise = DVector::from_fn(n, |_, _| {
        let g: f64 = rng.sample(StandardNormal);
        g / rng.random_range(0.05f64..1.0).sqrt()
    });
    Regression::new(&x * beta + noise, x).unwrap()
}

#[test]
fn row_permutation_leaves_fit_unchanged() {
    let reg = instance(1, 80, 4);
    let mut order: Vec<usize> = (0..80).collect();
    order.reverse();
    order.swap(3, 40);
    let x = DMatrix::from_fn(80, 4, |i, j| reg.x()[(order[i], j)]);
    let y = DVector::from_fn(80, |i, _| reg.y()[order[i]]);
    let shuffled = Regression::new(y, x).unwrap();
    let cfg = RobustConfig::new(1.0, 3.0).unwrap();
    let beta = DVector::from_vec(vec![0.3, -0.2, 0.1, 0.5]);
    let a = robust_objective(&reg, &beta, &cfg).unwrap();
    let b = robust_objective(&shuffled, &beta, &cfg).unwrap();
    assert!((a - b).abs() <= 1e-14 * a.abs().max(1.0));
    let fa = proximal_gradient_fit(&reg, &cfg, &Penalty::L1, 0.05, &tight(2)).unwrap();
    let fb = proximal_gradient_fit(&shuffled, &cfg, &Penalty::L1, 0.05, &tight(2)).unwrap();
    assert!((fa.beta_hat - fb.beta_hat).amax() < 1e-9);
}

#[test]
fn column_permutation_permutes_estimate() {
    let reg = instance(3, 120, 5);
    let perm = [2, 0, 4, 1, 3];
    let x = DMatrix::from_fn(120, 5, |i, j| reg.x()[(i, perm[j])]);
    let permuted = Regression::new(reg.y().clone(), x).unwrap();
    let cfg = RobustConfig::new(0.7, 2.5).unwrap();
    let a = proximal_gradient_fit(&reg, &cfg, &Penalty::L1, 0.05, &tight(5)).unwrap();
    let b = proximal_gradient_fit(&permuted, &cfg, &Penalty::L1, 0.05, &tight(6)).unwrap();
    for (j, &src) in perm.iter().enumerate() {
        assert!((b.beta_hat[j] - a.beta_hat[src]).abs() < 1e-7, "coordinate {j}");
    }
}

#[test]
fn univariate_fit_var_equals_single_regression() {
    let model = VarModel::var1(DMatrix::from_element(1, 1, 0.6)).unwrap();
    let spec = DgpSpec::var_t(model, NoiseSpec::student_t(3.0).unwrap()).unwrap();
    let data = simulate(&spec, 200, 100, 4).unwrap();
    let cfg = FitConfig {
        opt: OptimizerConfig { seed: 17, ..OptimizerConfig::default() },
        ..FitConfig::new(RobustConfig::new(1.0, 3.0).unwrap(), LambdaMode::Explicit(0.01))
    };
    let fit = fit_var(&data, 1, &cfg).unwrap();
    let reg = &decompose_regressions(&data, 1).unwrap()[0];
    let single = proximal_gradient_fit(
        reg,
        &cfg.robust,
        &Penalty::L1,
        0.01,
        &OptimizerConfig { seed: column_seed(17, 0), ..cfg.opt.clone() },
    )
    .unwrap();
    assert_eq!(fit.model.coeffs()[0][(0, 0)], single.beta_hat[0]);
    assert_eq!(fit.fits[0].iterations, single.iterations);
}

#[test]
fn exact_linear_series_is_recovered() {
    // a deterministic VAR(1) with no noise, started away from zero: every
    // column regression is noiseless, so a tiny penalty recovers B
    let b = DMatrix::from_row_slice(3, 3, &[0.9, 0.2, 0.0, -0.3, 0.8, 0.1, 0.0, 0.0, 0.95]);
    let mut z = DMatrix::zeros(40, 3);
    let mut state = DVector::from_vec(vec![1.0, -2.0, 0.5]);
    for t in 0..40 {
        z.set_row(t, &state.transpose());
        state = b.transpose() * &state;
    }
    let data = TimeSeriesMatrix::new(z).unwrap();
    let cfg = FitConfig {
        opt: tight(0),
        ..FitConfig::new(RobustConfig::new(1.0, 3.0).unwrap(), LambdaMode::Explicit(1e-9))
    };
    let fit = fit_var(&data, 1, &cfg).unwrap();
    let err = estimation_error(&fit.model, &VarModel::var1(b).unwrap()).unwrap();
    assert!(err < 1e-5, "error {err}");
}

#[test]
fn error_shrinks_on_long_heavy_tailed_paths() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let p = 6;
    let b = DMatrix::from_fn(p, p, |i, j| if i == j { 0.5 } else if (i + 1) % p == j && rng.random_bool(0.5) { 0.3 } else { 0.0 });
    let truth = VarModel::var1(b).unwrap();
    let spec = DgpSpec::var_t(truth.clone(), NoiseSpec::student_t(2.5).unwrap()).unwrap();
    let cfg = FitConfig::new(RobustConfig::new(1.0, 3.0).unwrap(), LambdaMode::Theory(0.25));
    let errs: Vec<f64> = [50, 400, 3200]
        .iter()
        .map(|&n| {
            let data = simulate(&spec, n + 1, 500, 21).unwrap();
            estimation_error(&fit_var(&data, 1, &cfg).unwrap().model, &truth).unwrap()
        })
        .collect();
    assert!(errs[2] < errs[0], "{errs:?}");
    assert!(errs[2] < 0.15, "{errs:?}");
}

#[test]
fn gaussian_var_matches_lyapunov_covariance() {
    let b = DMatrix::from_row_slice(2, 2, &[0.5, 0.3, 0.0, 0.4]);
    let spec = DgpSpec::var_t(VarModel::var1(b.clone()).unwrap(), NoiseSpec::standard_gaussian()).unwrap();
    let data = simulate(&spec, 200_000, 500, 77).unwrap();
    // Σ = Bᵀ Σ B + I by fixed-point iteration
    let mut sigma = DMatrix::<f64>::identity(2, 2);
    for _ in 0..200 {
        sigma = b.transpose() * &sigma * &b + DMatrix::identity(2, 2);
    }
    let z = data.data();
    let n = z.nrows() as f64;
    for i in 0..2 {
        for j in 0..2 {
            let s: f64 = (0..z.nrows()).map(|t| z[(t, i)] * z[(t, j)]).sum::<f64>() / n;
            assert!((s - sigma[(i, j)]).abs() < 0.05 * sigma[(i, i)].max(sigma[(j, j)]), "({i},{j}) {s} vs {}", sigma[(i, j)]);
        }
    }
}
