use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;
use crate::var::{spectral_radius, VarModel};

fn gauss(sd: f64) -> NoiseSpec {
    NoiseSpec::gaussian(sd).unwrap()
}

#[test]
fn er_transition_examples() {
    let b = gen_er_transition(10, 0.05, 0.5, 1).unwrap();
    assert!((spectral_radius(&b).unwrap() - 0.5).abs() < 1e-8);
    let nnz = b.iter().filter(|v| **v != 0.0).count() as f64;
    let sd = (100.0f64 * 0.05 * 0.95).sqrt();
    assert!((nnz - 5.0).abs() <= 3.0 * sd, "nnz {nnz}");

    let dense = gen_er_transition(2, 1.0, 0.5, 3).unwrap();
    assert!(dense.iter().all(|v| *v != 0.0));
    assert_eq!(gen_er_transition(10, 0.05, 0.5, 77).unwrap(), gen_er_transition(10, 0.05, 0.5, 77).unwrap());

    let unit = gen_er_transition_with(6, 0.3, 0.5, 4, EdgeWeights::Unit).unwrap();
    let vals: Vec<f64> = unit.iter().copied().filter(|v| *v != 0.0).collect();
    assert!(vals.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn er_transition_errors() {
    assert!(gen_er_transition(4, 0.0, 0.5, 1).is_err());
    assert!(gen_er_transition(4, 0.5, 0.0, 1).is_err());
    // p = 1 with tiny density almost never draws the single entry
    assert!(matches!(gen_er_transition(1, 1e-9, 0.5, 1), Err(Error::Generation(_))));
}

#[test]
fn white_noise_has_no_autocorrelation() {
    let spec = DgpSpec::var_t(VarModel::zeros(3, 1), NoiseSpec::student_t(5.0).unwrap()).unwrap();
    let n = 4000;
    let ts = simulate(&spec, n, 10, 12).unwrap();
    for j in 0..3 {
        let col = ts.data().column(j);
        let mean = col.mean();
        let var: f64 = col.iter().map(|v| (v - mean).powi(2)).sum();
        let cov: f64 = (1..n).map(|t| (col[t] - mean) * (col[t - 1] - mean)).sum();
        assert!((cov / var).abs() < 3.0 / (n as f64).sqrt());
    }
}

#[test]
fn homoskedastic_arch_is_plain_ar() {
    let d0: f64 = 0.7;
    let arch = DgpSpec::new(DgpKind::UnivariateArch {
        b: vec![0.6],
        d0,
        d: vec![0.0],
        noise: gauss(1.0),
    })
    .unwrap();
    let ar = DgpSpec::var_t(
        VarModel::new(vec![DMatrix::from_element(1, 1, 0.6)]).unwrap(),
        gauss(d0.sqrt()),
    )
    .unwrap();
    let a = simulate(&arch, 300, 50, 5).unwrap();
    assert_eq!(a, simulate(&ar, 300, 50, 5).unwrap());
    assert_eq!(a, simulate_companion(&VarModel::new(vec![DMatrix::from_element(1, 1, 0.6)]).unwrap(), &gauss(d0.sqrt()), 300, 50, 5).unwrap());
}

#[test]
fn arch_criterion_rejects_higher_order_companions() {
    // Σ diag of Mᵀ M contains a 1 for every lag beyond the first
    let err = DgpSpec::new(DgpKind::UnivariateArch {
        b: vec![0.1, 0.05],
        d0: 1.0,
        d: vec![0.0, 0.0],
        noise: gauss(1.0),
    })
    .unwrap_err();
    assert!(matches!(err, Error::Unstable { .. }));
}

#[test]
fn constant_arch_variance_is_var_t() {
    let b = DMatrix::from_row_slice(2, 2, &[0.3, 0.1, 0.0, 0.4]);
    let f = 2.5f64;
    let arch = DgpSpec::new(DgpKind::ArchVar {
        b: b.clone(),
        f: vec![f; 2],
        f_mats: vec![DMatrix::zeros(2, 2); 2],
        noise: gauss(1.0),
    })
    .unwrap();
    let var = DgpSpec::var_t(VarModel::var1(b).unwrap(), gauss(f.sqrt())).unwrap();
    assert_eq!(simulate(&arch, 200, 20, 8).unwrap(), simulate(&var, 200, 20, 8).unwrap());
}

#[test]
fn bekk_square_root_reconstructs() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let c = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.5, 0.2, 0.1, 0.2, 1.0]);
    let f = DMatrix::from_fn(3, 3, |_, _| rng.random_range(-0.5..0.5));
    for _ in 0..100 {
        let z = DVector::from_fn(3, |_, _| rng.random_range(-5.0..5.0));
        let m = bekk_covariance(&c, &f, &z);
        let root = psd_sqrt(&m);
        assert!((&root * &root - &m).norm() <= 1e-10);
    }
}

#[test]
fn threshold_partition_fires_once() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let parts = [
        Regions::SignOfFirst,
        Regions::Slabs { coord: 1, cuts: vec![-1.0, 0.0, 2.0] },
        Regions::Custom(RegionOracle::new(3, |z| if z[2] > 1.0 { 2 } else { usize::from(z[0] > z[1]) })),
    ];
    for regions in &parts {
        for _ in 0..10_000 {
            let z: Vec<f64> = (0..3).map(|_| rng.random_range(-4.0..4.0)).collect();
            assert_eq!(regions.indicators(&z).unwrap().iter().filter(|b| **b).count(), 1);
            let lifted = regions.lift(&z).unwrap();
            let a: f64 = lifted.iter().map(|v| v * v).sum();
            let b: f64 = z.iter().map(|v| v * v).sum();
            assert_eq!(a, b);
        }
    }
    let bad = Regions::Custom(RegionOracle::new(2, |_| 5));
    assert!(bad.index(&[0.0]).is_err());
}

#[test]
fn threshold_simulation_uses_region_matrix() {
    let spec = DgpSpec::new(DgpKind::ThresholdVar {
        coeffs: vec![DMatrix::identity(2, 2) * 0.5, DMatrix::identity(2, 2) * -0.5],
        regions: Regions::SignOfFirst,
        noise: gauss(0.0),
    })
    .unwrap();
    let ts = simulate(&spec, 5, 0, 1).unwrap();
    assert!(ts.data().iter().all(|v| *v == 0.0));
}

#[test]
fn explosive_paths_are_errors() {
    let spec = DgpSpec::var_t(VarModel::var1(DMatrix::identity(2, 2) * 0.5).unwrap(), gauss(1e308)).unwrap();
    assert!(matches!(simulate(&spec, 50, 0, 1), Err(Error::Explosive { .. })));
    assert!(matches!(simulate_retrying(&spec, 50, 0, 1, 3), Err(Error::Explosive { .. })));
    let calm = DgpSpec::var_t(VarModel::var1(DMatrix::identity(2, 2) * 0.5).unwrap(), gauss(1.0)).unwrap();
    let (ts, attempts) = simulate_retrying(&calm, 50, 0, 1, 3).unwrap();
    assert_eq!(attempts, 1);
    assert_eq!(ts, simulate(&calm, 50, 0, 1).unwrap());
}

#[test]
fn rc_var_runs_and_is_seeded() {
    let spec = DgpSpec::new(DgpKind::RcVar {
        b: DMatrix::identity(3, 3) * 0.4,
        gamma_sd: 0.2,
        noise: NoiseSpec::student_t(4.0).unwrap(),
    })
    .unwrap();
    let a = simulate(&spec, 100, 100, 3).unwrap();
    assert_eq!(a, simulate(&spec, 100, 100, 3).unwrap());
    assert_ne!(a, simulate(&spec, 100, 100, 4).unwrap());
}

#[test]
fn rc_second_moment_matches_monte_carlo() {
    let p = 2;
    let sd = 0.7;
    let c = rc_second_moment(p, sd);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let normal = rand_distr::StandardNormal;
    let mut acc = DMatrix::zeros(p * p, p * p);
    let reps = 100_000;
    for _ in 0..reps {
        let g = DMatrix::from_fn(p, p, |_, _| sd * rng.sample::<f64, _>(normal));
        acc += g.kronecker(&g);
    }
    acc /= reps as f64;
    assert!((acc - c).amax() < 0.02);
}

#[test]
fn dgp_json_round_trip() {
    let json = r#"{"var_t":{"model":{"coeffs":[[[0.5,0.0],[0.1,0.2]]]},"noise":{"student_t":{"df":3.0}}}}"#;
    let spec: DgpSpec = serde_json::from_str(json).unwrap();
    assert_eq!(spec.dim(), 2);
    assert!((spec.radius() - 0.5).abs() < 1e-12);
    assert_eq!(serde_json::to_string(&spec).unwrap(), json);
    let unstable = r#"{"var_t":{"model":{"coeffs":[[[1.5]]]},"noise":{"gaussian":{"sd":1.0}}}}"#;
    let err = serde_json::from_str::<DgpSpec>(unstable).unwrap_err().to_string();
    assert!(err.contains("1.5"), "{err}");
}
