use nalgebra::{DMatrix, Schur};

use crate::error::{Error, Result};

const SCHUR_MAX_ITER: usize = 10_000;

/// Largest eigenvalue modulus, via a real Schur (shifted QR) decomposition.
pub fn spectral_radius(a: &DMatrix<f64>) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "spectral radius of a non-square {}x{} matrix",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("spectral radius of a non-finite matrix".into()));
    }
    if a.nrows() == 0 {
        return Ok(0.0);
    }
    // Shifted QR can stall on permutation-like 0/1 patterns; an orthogonal
    // similarity keeps the spectrum and breaks the symmetry.
    for attempt in 0..=REFLECTION_RETRIES {
        let m = if attempt == 0 { a.clone() } else { reflect(a, attempt) };
        if let Some(schur) = Schur::try_new(m, f64::EPSILON, SCHUR_MAX_ITER) {
            return Ok(schur
                .complex_eigenvalues()
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max));
        }
    }
    Err(Error::EigenNoConvergence { iterations: SCHUR_MAX_ITER })
}

const REFLECTION_RETRIES: usize = 3;

/// `H a H` for the Householder reflection `H = I − 2vvᵀ/vᵀv` along a fixed
/// irregular vector.
fn reflect(a: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let n = a.nrows();
    let v = nalgebra::DVector::from_fn(n, |i, _| ((i + 1) as f64 * (0.754_877_666 + k as f64)).sin() + 1.5);
    let h = DMatrix::identity(n, n) - (&v * v.transpose()) * (2.0 / v.norm_squared());
    &h * a * &h
}

/// Scale `a` so its spectral radius equals `rho_target`.
pub fn rescale_to_radius(a: &DMatrix<f64>, rho_target: f64) -> Result<DMatrix<f64>> {
    if !(rho_target > 0.0 && rho_target.is_finite()) {
        return Err(Error::Config(format!("target radius must be positive, got {rho_target}")));
    }
    // Schur perturbs the zero eigenvalues of a nilpotent block to roughly
    // eps^(1/k), so an acyclic sparsity pattern is rejected structurally.
    if a.is_square() && pattern_is_acyclic(a) {
        return Err(Error::ZeroRadius);
    }
    let rho = spectral_radius(a)?;
    if rho <= 1e-12 * a.amax() {
        return Err(Error::ZeroRadius);
    }
    Ok(a * (rho_target / rho))
}

/// True when the directed graph `i → j` for `a[(i, j)] ≠ 0` has no cycle,
/// i.e. the matrix is nilpotent by its sparsity pattern alone.
pub(crate) fn pattern_is_acyclic(a: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    let mut indegree = vec![0usize; n];
    for i in 0..n {
        for j in 0..n {
            if a[(i, j)] != 0.0 {
                indegree[j] += 1;
            }
        }
    }
    let mut ready: Vec<usize> = (0..n).filter(|&j| indegree[j] == 0).collect();
    let mut removed = 0;
    while let Some(i) = ready.pop() {
        removed += 1;
        for j in 0..n {
            if a[(i, j)] != 0.0 {
                indegree[j] -= 1;
                if indegree[j] == 0 {
                    ready.push(j);
                }
            }
        }
    }
    removed == n
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}
