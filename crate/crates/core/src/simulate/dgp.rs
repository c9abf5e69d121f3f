use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::noise::{NoiseSampler, NoiseSpec};
use crate::error::{Error, Result};
use crate::numeric::substream;
use crate::series::TimeSeriesMatrix;
use crate::var::{kron, spectral_radius, VarModel};

/// Default number of discarded initial steps.
pub const DEFAULT_BURN_IN: usize = 500;

type RegionFn = dyn Fn(&[f64]) -> usize + Send + Sync;

/// User-supplied region membership: maps a state to a region index `< count`.
#[derive(Clone)]
pub struct RegionOracle {
    count: usize,
    f: Arc<RegionFn>,
}

impl RegionOracle {
    pub fn new(count: usize, f: impl Fn(&[f64]) -> usize + Send + Sync + 'static) -> Self {
        Self { count, f: Arc::new(f) }
    }
}

impl fmt::Debug for RegionOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RegionOracle").field("count", &self.count).finish()
    }
}

/// A partition of `ℝ^p` for the threshold VAR.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regions {
    /// Two regions: `z_1 ≥ 0` and `z_1 < 0`.
    SignOfFirst,
    /// Slabs along one coordinate split at increasing `cuts`
    /// (`cuts.len() + 1` regions).
    Slabs { coord: usize, cuts: Vec<f64> },
    /// Accepted unchecked beyond the index range.
    #[serde(skip)]
    Custom(RegionOracle),
}

impl Regions {
    pub fn count(&self) -> usize {
        match self {
            Regions::SignOfFirst => 2,
            Regions::Slabs { cuts, .. } => cuts.len() + 1,
            Regions::Custom(o) => o.count,
        }
    }

    /// Index of the region containing `z`.
    pub fn index(&self, z: &[f64]) -> Result<usize> {
        let k = match self {
            Regions::SignOfFirst => usize::from(z[0] < 0.0),
            Regions::Slabs { coord, cuts } => cuts.iter().take_while(|&&c| z[*coord] >= c).count(),
            Regions::Custom(o) => (o.f)(z),
        };
        if k >= self.count() {
            return Err(Error::Config(format!(
                "region oracle returned {k} for a {}-region partition",
                self.count()
            )));
        }
        Ok(k)
    }

    /// Indicator vector of region membership.
    pub fn indicators(&self, z: &[f64]) -> Result<Vec<bool>> {
        let k = self.index(z)?;
        Ok((0..self.count()).map(|j| j == k).collect())
    }

    /// The lifting `f(z) = (1(z∈G_1) zᵀ, …, 1(z∈G_l) zᵀ)ᵀ`.
    pub fn lift(&self, z: &[f64]) -> Result<Vec<f64>> {
        let k = self.index(z)?;
        let p = z.len();
        let mut out = vec![0.0; p * self.count()];
        out[k * p..(k + 1) * p].copy_from_slice(z);
        Ok(out)
    }

    fn validate(&self, p: usize) -> Result<()> {
        match self {
            Regions::Slabs { coord, cuts } => {
                if *coord >= p {
                    return Err(Error::Config(format!("slab coordinate {coord} out of range")));
                }
                if cuts.windows(2).any(|w| !(w[0] < w[1])) || cuts.iter().any(|c| !c.is_finite()) {
                    return Err(Error::Config("slab cuts must be finite and increasing".into()));
                }
                Ok(())
            }
            Regions::Custom(o) if o.count == 0 => Err(Error::Config("custom partition needs regions".into())),
            _ => Ok(()),
        }
    }
}

/// The data-generating processes, before validation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DgpKind {
    /// `Z_t = Σ_k B_kᵀ Z_{t−k} + ε_t`.
    VarT { model: VarModel, noise: NoiseSpec },
    /// `Z_t = BᵀZ_{t−1} + Σ(Z_{t−1}) η_t`, `Σ(z) = diag[(f_j + zᵀF_j z)^{1/2}]`.
    ArchVar {
        #[serde(with = "crate::matrix_serde")]
        b: DMatrix<f64>,
        f: Vec<f64>,
        #[serde(with = "crate::matrix_serde::vec")]
        f_mats: Vec<DMatrix<f64>>,
        noise: NoiseSpec,
    },
    /// `z_t = Σ_j b_j z_{t−j} + σ(z_{t−1..t−p}) η_t`, `σ(u) = √(d₀ + Σ d_j u_j²)`.
    UnivariateArch {
        b: Vec<f64>,
        d0: f64,
        d: Vec<f64>,
        noise: NoiseSpec,
    },
    /// `Z_t = BᵀZ_{t−1} + [C + FᵀZZᵀF]^{1/2} η_t`.
    BekkVar {
        #[serde(with = "crate::matrix_serde")]
        b: DMatrix<f64>,
        #[serde(with = "crate::matrix_serde")]
        c: DMatrix<f64>,
        #[serde(with = "crate::matrix_serde")]
        f: DMatrix<f64>,
        noise: NoiseSpec,
    },
    /// `z_t = Σ_j B_jᵀ 1(z_{t−1} ∈ G_j) z_{t−1} + η_t`.
    ThresholdVar {
        #[serde(with = "crate::matrix_serde::vec")]
        coeffs: Vec<DMatrix<f64>>,
        regions: Regions,
        noise: NoiseSpec,
    },
    /// `z_t = (Bᵀ + Γ_t) z_{t−1} + η_t` with iid `N(0, gamma_sd²)` entries in `Γ_t`.
    RcVar {
        #[serde(with = "crate::matrix_serde")]
        b: DMatrix<f64>,
        gamma_sd: f64,
        noise: NoiseSpec,
    },
}

/// A validated data-generating process whose stability criterion holds.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "DgpKind", into = "DgpKind")]
pub struct DgpSpec {
    kind: DgpKind,
    radius: f64,
}

impl TryFrom<DgpKind> for DgpSpec {
    type Error = Error;

    fn try_from(kind: DgpKind) -> Result<Self> {
        DgpSpec::new(kind)
    }
}

impl From<DgpSpec> for DgpKind {
    fn from(s: DgpSpec) -> Self {
        s.kind
    }
}

fn check_square(name: &str, m: &DMatrix<f64>, p: usize) -> Result<()> {
    if m.nrows() != p || m.ncols() != p {
        return Err(Error::Dimension(format!(
            "{name} is {}x{}, expected {p}x{p}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(format!("{name} is not finite")));
    }
    Ok(())
}

fn symmetric_eigenvalues(name: &str, m: &DMatrix<f64>) -> Result<DVector<f64>> {
    let asym = (m - m.transpose()).amax();
    if asym > 1e-12 * m.amax().max(1.0) {
        return Err(Error::Config(format!("{name} must be symmetric")));
    }
    Ok(SymmetricEigen::new(m.clone()).eigenvalues)
}

/// Symmetric PSD square root via eigendecomposition, negative eigenvalues
/// clamped to zero.
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// `C + FᵀzzᵀF`.
pub fn bekk_covariance(c: &DMatrix<f64>, f: &DMatrix<f64>, z: &DVector<f64>) -> DMatrix<f64> {
    let v = f.transpose() * z;
    c + &v * v.transpose()
}

/// Companion matrix of the scalar AR(p) with coefficients `b` (first row `b`,
/// ones on the subdiagonal).
pub fn ar_companion(b: &[f64]) -> DMatrix<f64> {
    let p = b.len();
    DMatrix::from_fn(p, p, |i, j| if i == 0 { b[j] } else if j + 1 == i { 1.0 } else { 0.0 })
}

impl DgpSpec {
    /// Validate dimensions and the variant's stability criterion.
    pub fn new(kind: DgpKind) -> Result<Self> {
        let (criterion, radius) = stability(&kind)?;
        if !(radius < 1.0) {
            return Err(Error::Unstable {
                criterion: criterion.into(),
                radius,
            });
        }
        Ok(Self { kind, radius })
    }

    pub fn var_t(model: VarModel, noise: NoiseSpec) -> Result<Self> {
        Self::new(DgpKind::VarT { model, noise })
    }

    pub fn kind(&self) -> &DgpKind {
        &self.kind
    }

    /// Value of the stability quantity (strictly below 1).
    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Output dimension.
    pub fn dim(&self) -> usize {
        match &self.kind {
            DgpKind::VarT { model, .. } => model.p(),
            DgpKind::ArchVar { b, .. } | DgpKind::BekkVar { b, .. } | DgpKind::RcVar { b, .. } => b.nrows(),
            DgpKind::UnivariateArch { .. } => 1,
            DgpKind::ThresholdVar { coeffs, .. } => coeffs[0].nrows(),
        }
    }
}

/// Criterion name and its radius for each variant.
pub fn stability(kind: &DgpKind) -> Result<(&'static str, f64)> {
    match kind {
        DgpKind::VarT { model, .. } => Ok(("rho(companion) < 1", model.radius()?)),
        DgpKind::ArchVar { b, f, f_mats, .. } => {
            let p = b.nrows();
            check_square("B", b, p)?;
            if f.len() != p || f_mats.len() != p {
                return Err(Error::Dimension(format!("arch_var needs {p} f_j and F_j")));
            }
            if f.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::Config("arch_var f_j must be positive".into()));
            }
            let mut max_rho: f64 = 0.0;
            for (j, fm) in f_mats.iter().enumerate() {
                check_square("F_j", fm, p)?;
                let eig = symmetric_eigenvalues("F_j", fm)?;
                if eig.min() < -1e-12 * fm.amax().max(1.0) {
                    return Err(Error::Config(format!("F_{} must be positive semidefinite", j + 1)));
                }
                max_rho = max_rho.max(eig.amax());
            }
            let rb = spectral_radius(b)?;
            Ok(("rho(B)^2 + max_j rho(F_j) < 1", rb * rb + max_rho))
        }
        DgpKind::UnivariateArch { b, d0, d, .. } => {
            if b.is_empty() || d.len() != b.len() {
                return Err(Error::Dimension("univariate_arch needs equal-length b and d".into()));
            }
            if !(*d0 > 0.0 && d0.is_finite()) || d.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(Error::Config("univariate_arch needs d0 > 0 and d_j >= 0".into()));
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain("univariate_arch b is not finite".into()));
            }
            // companion shown as Bᵀ, so B Bᵀ = Mᵀ M
            let m = ar_companion(b);
            let mut bt = m.transpose() * &m;
            for (j, dj) in d.iter().enumerate() {
                bt[(j, j)] += dj;
            }
            Ok(("rho(B B^T + diag(d)) < 1", spectral_radius(&bt)?))
        }
        DgpKind::BekkVar { b, c, f, .. } => {
            let p = b.nrows();
            check_square("B", b, p)?;
            check_square("C", c, p)?;
            check_square("F", f, p)?;
            if !(symmetric_eigenvalues("C", c)?.min() > 0.0) {
                return Err(Error::Config("BEKK C must be positive definite".into()));
            }
            let m = b * b.transpose() + f * f.transpose();
            Ok(("rho(B B^T + F F^T) < 1", spectral_radius(&m)?))
        }
        DgpKind::ThresholdVar { coeffs, regions, .. } => {
            let p = coeffs.first().map_or(0, |c| c.nrows());
            if p == 0 {
                return Err(Error::Config("threshold_var needs coefficient matrices".into()));
            }
            if coeffs.len() != regions.count() {
                return Err(Error::Dimension(format!(
                    "{} coefficient matrices for {} regions",
                    coeffs.len(),
                    regions.count()
                )));
            }
            regions.validate(p)?;
            let mut gram = DMatrix::zeros(p, p);
            for c in coeffs {
                check_square("B_j", c, p)?;
                gram += c.transpose() * c;
            }
            // ||[B_1ᵀ … B_lᵀ]||₂ = sqrt(ρ(Σ_j B_jᵀ B_j))
            Ok(("||augmented B||_2 < 1", spectral_radius(&gram)?.sqrt()))
        }
        DgpKind::RcVar { b, gamma_sd, .. } => {
            let p = b.nrows();
            check_square("B", b, p)?;
            if !(*gamma_sd >= 0.0 && gamma_sd.is_finite()) {
                return Err(Error::Config("gamma_sd must be nonnegative".into()));
            }
            let m = kron(&b.transpose(), &b.transpose()) + rc_second_moment(p, *gamma_sd);
            Ok(("rho(B^T (x) B^T + E[Gamma (x) Gamma]) < 1", spectral_radius(&m)?))
        }
    }
}

/// `E[Γ ⊗ Γ]` for `Γ` with iid `N(0, sd²)` entries: `sd² · vec(I) vec(I)ᵀ`.
pub fn rc_second_moment(p: usize, sd: f64) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(p * p, p * p);
    for i in 0..p {
        for j in 0..p {
            c[(i * p + i, j * p + j)] = sd * sd;
        }
    }
    c
}

fn draw_vec<R: Rng>(sampler: &NoiseSampler, p: usize, rng: &mut R) -> Vec<f64> {
    (0..p).map(|_| sampler.draw(rng)).collect()
}

fn check_state(state: &[f64], step: usize) -> Result<()> {
    if state.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Explosive { step })
    }
}

/// Run `burn_in + n` steps from a zero start and keep the last `n` rows.
///
/// Uses substream 0 of `seed`.
pub fn simulate(spec: &DgpSpec, n: usize, burn_in: usize, seed: u64) -> Result<TimeSeriesMatrix> {
    simulate_stream(spec, n, burn_in, seed, 0)
}

/// Retry on explosive paths with the next substream, up to `max_attempts`.
/// Returns the path and the number of attempts used.
pub fn simulate_retrying(
    spec: &DgpSpec,
    n: usize,
    burn_in: usize,
    seed: u64,
    max_attempts: usize,
) -> Result<(TimeSeriesMatrix, usize)> {
    let mut last = None;
    for attempt in 0..max_attempts {
        match simulate_stream(spec, n, burn_in, seed, attempt as u64) {
            Ok(ts) => return Ok((ts, attempt + 1)),
            Err(e @ Error::Explosive { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::Config("max_attempts must be positive".into())))
}

fn simulate_stream(
    spec: &DgpSpec,
    n: usize,
    burn_in: usize,
    seed: u64,
    stream: u64,
) -> Result<TimeSeriesMatrix> {
    if n == 0 {
        return Err(Error::Config("simulation length must be positive".into()));
    }
    let mut rng = substream(seed, stream);
    let p = spec.dim();
    let total = burn_in + n;
    let mut out = DMatrix::zeros(n, p);
    let mut record = |t: usize, z: &[f64]| {
        if t >= burn_in {
            for (j, v) in z.iter().enumerate() {
                out[(t - burn_in, j)] = *v;
            }
        }
    };

    match &spec.kind {
        DgpKind::VarT { model, noise } => {
            let sampler = noise.sampler();
            let d = model.d();
            // stacked (Z_{t−1}, …, Z_{t−d})
            let mut lags = vec![0.0; p * d];
            for t in 0..total {
                let eps = draw_vec(&sampler, p, &mut rng);
                let mut z = vec![0.0; p];
                for (i, zi) in z.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for (m, s) in lags.iter().enumerate() {
                        acc += model.coeffs()[m / p][(m % p, i)] * s;
                    }
                    *zi = acc + eps[i];
                }
                check_state(&z, t + 1)?;
                lags.rotate_right(p);
                lags[..p].copy_from_slice(&z);
                record(t, &z);
            }
        }
        DgpKind::ArchVar { b, f, f_mats, noise } => {
            let sampler = noise.sampler();
            let mut z = DVector::zeros(p);
            for t in 0..total {
                let eta = draw_vec(&sampler, p, &mut rng);
                let next = DVector::from_fn(p, |i, _| {
                    let mut acc = 0.0;
                    for l in 0..p {
                        acc += b[(l, i)] * z[l];
                    }
                    let sigma = (f[i] + z.dot(&(&f_mats[i] * &z))).sqrt();
                    acc + sigma * eta[i]
                });
                check_state(next.as_slice(), t + 1)?;
                z = next;
                record(t, z.as_slice());
            }
        }
        DgpKind::UnivariateArch { b, d0, d, noise } => {
            let sampler = noise.sampler();
            // (z_{t−1}, …, z_{t−p})
            let mut lags = vec![0.0; b.len()];
            for t in 0..total {
                let eta = sampler.draw(&mut rng);
                let mut acc = 0.0;
                for (bj, zj) in b.iter().zip(&lags) {
                    acc += bj * zj;
                }
                let mut var = *d0;
                for (dj, zj) in d.iter().zip(&lags) {
                    var += dj * zj * zj;
                }
                let z = acc + var.sqrt() * eta;
                check_state(&[z], t + 1)?;
                lags.rotate_right(1);
                lags[0] = z;
                record(t, &[z]);
            }
        }
        DgpKind::BekkVar { b, c, f, noise } => {
            let sampler = noise.sampler();
            let mut z = DVector::zeros(p);
            for t in 0..total {
                let eta = DVector::from_vec(draw_vec(&sampler, p, &mut rng));
                let root = psd_sqrt(&bekk_covariance(c, f, &z));
                let next = b.transpose() * &z + root * eta;
                check_state(next.as_slice(), t + 1)?;
                z = next;
                record(t, z.as_slice());
            }
        }
        DgpKind::ThresholdVar { coeffs, regions, noise } => {
            let sampler = noise.sampler();
            let mut z = DVector::zeros(p);
            for t in 0..total {
                let eta = DVector::from_vec(draw_vec(&sampler, p, &mut rng));
                let k = regions.index(z.as_slice())?;
                let next = coeffs[k].transpose() * &z + eta;
                check_state(next.as_slice(), t + 1)?;
                z = next;
                record(t, z.as_slice());
            }
        }
        DgpKind::RcVar { b, gamma_sd, noise } => {
            let sampler = noise.sampler();
            let mut z = DVector::zeros(p);
            for t in 0..total {
                let gamma =
                    DMatrix::from_fn(p, p, |_, _| gamma_sd * rng.sample::<f64, _>(StandardNormal));
                let eta = DVector::from_vec(draw_vec(&sampler, p, &mut rng));
                let next = (b.transpose() + gamma) * &z + eta;
                check_state(next.as_slice(), t + 1)?;
                z = next;
                record(t, z.as_slice());
            }
        }
    }
    TimeSeriesMatrix::new(out)
}

/// Simulate a VAR(d) through its VAR(1) companion form, padding the noise
/// with zeros below the first `p` coordinates. Returns the first `p`
/// coordinates of the stacked state. Draws noise in the same order as
/// [`simulate`] for a `VarT` spec.
pub fn simulate_companion(
    model: &VarModel,
    noise: &NoiseSpec,
    n: usize,
    burn_in: usize,
    seed: u64,
) -> Result<TimeSeriesMatrix> {
    if n == 0 {
        return Err(Error::Config("simulation length must be positive".into()));
    }
    let a = model.companion();
    let p = model.p();
    let dim = a.nrows();
    let sampler = noise.sampler();
    let mut rng = substream(seed, 0);
    let mut state = vec![0.0; dim];
    let mut out = DMatrix::zeros(n, p);
    for t in 0..burn_in + n {
        let mut eps = draw_vec(&sampler, p, &mut rng);
        eps.resize(dim, 0.0);
        let next: Vec<f64> = (0..dim)
            .map(|i| {
                let mut acc = 0.0;
                for (m, s) in state.iter().enumerate() {
                    acc += a[(i, m)] * s;
                }
                acc + eps[i]
            })
            .collect();
        check_state(&next, t + 1)?;
        state = next;
        if t >= burn_in {
            for j in 0..p {
                out[(t - burn_in, j)] = state[j];
            }
        }
    }
    TimeSeriesMatrix::new(out)
}
