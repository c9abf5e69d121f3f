use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::substream;
use crate::var::rescale_to_radius;

const MAX_ATTEMPTS: u64 = 100;

/// Values placed on the edges of the random graph before rescaling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeWeights {
    /// Uniform(−1, 1), redrawn if exactly zero.
    #[default]
    Uniform,
    /// Plain 0/1 adjacency.
    Unit,
}

/// Sparse random transition matrix with spectral radius `rho_target`.
///
/// Each entry is an edge with probability `density`; draws whose sparsity
/// pattern is nilpotent are regenerated from the next substream.
pub fn gen_er_transition(p: usize, density: f64, rho_target: f64, seed: u64) -> Result<DMatrix<f64>> {
    gen_er_transition_with(p, density, rho_target, seed, EdgeWeights::Uniform)
}

pub fn gen_er_transition_with(
    p: usize,
    density: f64,
    rho_target: f64,
    seed: u64,
    weights: EdgeWeights,
) -> Result<DMatrix<f64>> {
    if p == 0 {
        return Err(Error::Config("dimension must be positive".into()));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::Config(format!("density must lie in (0, 1], got {density}")));
    }
    if !(rho_target > 0.0 && rho_target.is_finite()) {
        return Err(Error::Config(format!("target radius must be positive, got {rho_target}")));
    }
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = substream(seed, attempt);
        let mut a = DMatrix::zeros(p, p);
        for i in 0..p {
            for j in 0..p {
                if rng.random::<f64>() < density {
                    a[(i, j)] = match weights {
                        EdgeWeights::Unit => 1.0,
                        EdgeWeights::Uniform => loop {
                            let v: f64 = rng.random_range(-1.0..1.0);
                            if v != 0.0 {
                                break v;
                            }
                        },
                    };
                }
            }
        }
        match rescale_to_radius(&a, rho_target) {
            Ok(b) => return Ok(b),
            Err(Error::ZeroRadius) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::Generation(format!(
        "no transition matrix with positive spectral radius after {MAX_ATTEMPTS} attempts (p={p}, density={density})"
    )))
}
